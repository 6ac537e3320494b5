"""Molecular feature families: physical descriptors, structural-key
fingerprints, and SMILES n-gram counts, plus the Jaccard novelty distance
and fingerprint complexity used for reliability analysis.

All featurizers are deterministic and relabel-invariant; registries,
fingerprint specs, and vocabularies are immutable after construction and
serialize to versioned line-oriented text formats.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import chem
from .chem import MolecularGraph

log = logging.getLogger(__name__)

ATOMIC_MASSES = {
    "H": 1.008, "B": 10.811, "C": 12.011, "N": 14.007, "O": 15.999,
    "F": 18.998, "Na": 22.990, "Mg": 24.305, "Al": 26.982, "Si": 28.086,
    "P": 30.974, "S": 32.06, "Cl": 35.453, "K": 39.098, "Ca": 40.078,
    "Sc": 44.956, "Ti": 47.867, "V": 50.942, "Cr": 51.996, "Mn": 54.938,
    "Fe": 55.845, "Co": 58.933, "Ni": 58.693, "Cu": 63.546, "Zn": 65.38,
    "Ge": 72.63, "As": 74.922, "Se": 78.971, "Br": 79.904, "Sr": 87.62,
    "Mo": 95.95, "Ag": 107.868, "Cd": 112.414, "Sn": 118.71, "Sb": 121.76,
    "Te": 127.60, "I": 126.904, "Ba": 137.327, "Pt": 195.084, "Au": 196.967,
    "Hg": 200.592, "Pb": 207.2, "Bi": 208.980,
}

HALOGENS = ("F", "Cl", "Br", "I")


# ---------------------------------------------------------------------------
# physical descriptors


def _total_h(atom: chem.Atom) -> int:
    return atom.implicit_h


def molecular_weight(g: MolecularGraph) -> float:
    w = 0.0
    for a in g.atoms:
        w += ATOMIC_MASSES.get(a.element, 0.0) + _total_h(a) * ATOMIC_MASSES["H"]
    return w


def heavy_atom_count(g: MolecularGraph) -> float:
    return float(len(g.atoms))


def bond_count(g: MolecularGraph) -> float:
    return float(len(g.bonds))


def aromatic_atom_count(g: MolecularGraph) -> float:
    return float(sum(a.aromatic for a in g.atoms))


def aromatic_bond_count(g: MolecularGraph) -> float:
    return float(sum(b.aromatic for b in g.bonds))


def hbond_donor_count(g: MolecularGraph) -> float:
    return float(
        sum(1 for a in g.atoms if a.element in ("N", "O") and _total_h(a) >= 1)
    )


def hbond_acceptor_count(g: MolecularGraph) -> float:
    return float(sum(1 for a in g.atoms if a.element in ("N", "O")))


def rotatable_bond_count(g: MolecularGraph) -> float:
    count = 0
    for b in g.bonds:
        if (b.order == 1 and not b.aromatic and not b.in_ring
                and g.degree(b.a) >= 2 and g.degree(b.b) >= 2):
            count += 1
    return float(count)


def ring_count(g: MolecularGraph) -> float:
    return float(len(chem.ring_sizes(g)))


def largest_ring_size(g: MolecularGraph) -> float:
    sizes = chem.ring_sizes(g)
    return float(max(sizes)) if sizes else 0.0


def zagreb_index(g: MolecularGraph) -> float:
    return float(sum(g.degree(i) ** 2 for i in range(len(g.atoms))))


def _component_distances(g: MolecularGraph):
    comp = chem.largest_component(g)
    return comp, chem.distance_matrix(comp)


def wiener_index(g: MolecularGraph) -> float:
    comp, dist = _component_distances(g)
    n = len(comp.atoms)
    total = sum(dist[i][j] for i in range(n) for j in range(i + 1, n))
    return float(total)


def eccentric_connectivity_index(g: MolecularGraph) -> float:
    comp, dist = _component_distances(g)
    total = 0
    for i in range(len(comp.atoms)):
        ecc = max(dist[i].values()) if dist[i] else 0
        total += comp.degree(i) * ecc
    return float(total)


def petitjean_number(g: MolecularGraph) -> float:
    comp, dist = _component_distances(g)
    eccs = [max(d.values()) if d else 0 for d in dist.values()]
    if not eccs:
        return 0.0
    radius, diameter = min(eccs), max(eccs)
    if radius == 0:
        return 0.0
    return (diameter - radius) / radius


def mannhold_logp(g: MolecularGraph) -> float:
    n_c = sum(1 for a in g.atoms if a.element == "C")
    n_hetero = len(g.atoms) - n_c
    return 1.46 + 0.11 * n_c - 0.11 * n_hetero


# Fragment contributions to topological polar surface area for N and O,
# keyed by (element, aromatic, H count, sorted bond-order signature) where
# aromatic bonds contribute "a".  Unlisted environments fall back to the
# connectivity formulas in _tpsa_fallback.
_TPSA_TABLE = {
    ("N", False, 0, ("1", "1", "1")): 3.24,
    ("N", False, 0, ("1", "2")): 12.36,
    ("N", False, 0, ("3",)): 23.79,
    ("N", False, 1, ("1", "1")): 12.03,
    ("N", False, 1, ("2",)): 23.85,
    ("N", False, 2, ("1",)): 26.02,
    ("N", True, 0, ("a", "a")): 12.89,
    ("N", True, 0, ("1", "a", "a")): 4.41,
    ("N", True, 1, ("a", "a")): 15.79,
    ("O", False, 0, ("1", "1")): 9.23,
    ("O", False, 0, ("2",)): 17.07,
    ("O", False, 1, ("1",)): 20.23,
    ("O", True, 0, ("a", "a")): 13.14,
}


def _tpsa_fallback(element: str, conn: int, h: int) -> float:
    if element == "N":
        return max(30.5 - conn * 8.2 + h * 1.5, 0.0)
    return max(28.5 - conn * 8.6 + h * 1.5, 0.0)


def topological_psa(g: MolecularGraph) -> float:
    total = 0.0
    for i, a in enumerate(g.atoms):
        if a.element not in ("N", "O"):
            continue
        sig = tuple(sorted(
            "a" if g.bonds[b].aromatic else str(g.bonds[b].order)
            for b in g.adjacency[i]
        ))
        key = (a.element, a.aromatic, _total_h(a), sig)
        if key in _TPSA_TABLE:
            total += _TPSA_TABLE[key]
        else:
            total += _tpsa_fallback(a.element, g.degree(i) + _total_h(a),
                                    _total_h(a))
    return total


def halogen_count(g: MolecularGraph) -> float:
    return float(sum(1 for a in g.atoms if a.element in HALOGENS))


def rule_of_five_violations(g: MolecularGraph) -> float:
    violations = 0
    if molecular_weight(g) > 500:
        violations += 1
    if mannhold_logp(g) > 5:
        violations += 1
    if hbond_donor_count(g) > 5:
        violations += 1
    if hbond_acceptor_count(g) > 10:
        violations += 1
    return float(violations)


_BUILTIN_DESCRIPTORS: dict[str, Callable[[MolecularGraph], float]] = {
    "molecular_weight": molecular_weight,
    "heavy_atom_count": heavy_atom_count,
    "bond_count": bond_count,
    "aromatic_atom_count": aromatic_atom_count,
    "aromatic_bond_count": aromatic_bond_count,
    "hbond_donor_count": hbond_donor_count,
    "hbond_acceptor_count": hbond_acceptor_count,
    "rotatable_bond_count": rotatable_bond_count,
    "ring_count": ring_count,
    "largest_ring_size": largest_ring_size,
    "zagreb_index": zagreb_index,
    "wiener_index": wiener_index,
    "eccentric_connectivity_index": eccentric_connectivity_index,
    "petitjean_number": petitjean_number,
    "mannhold_logp": mannhold_logp,
    "topological_psa": topological_psa,
    "halogen_count": halogen_count,
    "rule_of_five_violations": rule_of_five_violations,
}


@dataclass(frozen=True)
class DescriptorRegistry:
    version: str
    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError("duplicate descriptor names")
        for name in self.names:
            if name not in _BUILTIN_DESCRIPTORS:
                raise ValueError(f"unknown descriptor {name!r}")

    def serialize(self) -> str:
        lines = [f"descriptor-registry {self.version}"]
        lines.extend(self.names)
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "DescriptorRegistry":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split()
        if header[0] != "descriptor-registry":
            raise ValueError("not a descriptor registry file")
        return cls(version=header[1], names=tuple(lines[1:]))


def default_registry() -> DescriptorRegistry:
    return DescriptorRegistry("v1", tuple(_BUILTIN_DESCRIPTORS))


def compute_pld(g: MolecularGraph, registry: DescriptorRegistry) -> np.ndarray:
    values = np.array(
        [_BUILTIN_DESCRIPTORS[name](g) for name in registry.names], dtype=float
    )
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite descriptor value")
    return values


# ---------------------------------------------------------------------------
# structural-key fingerprint

_ORDER_SYMBOL = {1: "-", 2: "=", 3: "#", "a": ":", "any": "~"}
_SYMBOL_ORDER = {v: k for k, v in _ORDER_SYMBOL.items()}

RING_KINDS = ("any", "aromatic", "carbon", "hetero")


@dataclass(frozen=True)
class CountBit:
    element: str
    min_count: int

    def label(self) -> str:
        return f"count {self.element} >= {self.min_count}"


@dataclass(frozen=True)
class RingBit:
    size: int
    min_count: int
    kind: str = "any"  # any | aromatic | carbon | hetero

    def __post_init__(self):
        if self.kind not in RING_KINDS:
            raise ValueError(f"unknown ring kind {self.kind!r}")

    def label(self) -> str:
        return f"ring size={self.size} count>={self.min_count} kind={self.kind}"


@dataclass(frozen=True)
class PathBit:
    elements: tuple[str, ...]
    orders: tuple[object, ...]  # entries of _ORDER_SYMBOL keys

    def __post_init__(self):
        if len(self.orders) != len(self.elements) - 1 or len(self.elements) < 2:
            raise ValueError("malformed path pattern")

    def label(self) -> str:
        parts = [self.elements[0]]
        for order, el in zip(self.orders, self.elements[1:]):
            parts.append(_ORDER_SYMBOL[order])
            parts.append(el)
        return "path " + "".join(parts)


@dataclass(frozen=True)
class FingerprintSpec:
    version: str
    bits: tuple[object, ...]

    def __len__(self) -> int:
        return len(self.bits)

    def labels(self) -> list[str]:
        return [b.label() for b in self.bits]

    def serialize(self) -> str:
        lines = [f"fingerprint-spec {self.version}"]
        lines.extend(self.labels())
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "FingerprintSpec":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        header = lines[0].split()
        if header[0] != "fingerprint-spec":
            raise ValueError("not a fingerprint spec file")
        return cls(version=header[1], bits=tuple(parse_bit(ln) for ln in lines[1:]))


def parse_bit(line: str):
    fields = line.split()
    if fields[0] == "count":
        if fields[2] != ">=":
            raise ValueError(f"malformed count bit {line!r}")
        return CountBit(fields[1], int(fields[3]))
    if fields[0] == "ring":
        kv = dict(f.replace(">=", "=").split("=", 1) for f in fields[1:])
        return RingBit(int(kv["size"]), int(kv["count"]), kv.get("kind", "any"))
    if fields[0] == "path":
        return parse_path_pattern(fields[1])
    raise ValueError(f"unknown bit definition {line!r}")


def parse_path_pattern(pattern: str) -> PathBit:
    elements: list[str] = []
    orders: list[object] = []
    i = 0
    while i < len(pattern):
        ch = pattern[i]
        if elements and ch in _SYMBOL_ORDER:
            orders.append(_SYMBOL_ORDER[ch])
            i += 1
            ch = pattern[i] if i < len(pattern) else ""
        elif elements:
            orders.append(1)
        if pattern[i : i + 2] in ("Cl", "Br"):
            elements.append(pattern[i : i + 2])
            i += 2
        elif ch.isalpha():
            elements.append(ch)
            i += 1
        else:
            raise ValueError(f"malformed path pattern {pattern!r}")
    return PathBit(tuple(elements), tuple(orders))


def default_fingerprint_spec() -> FingerprintSpec:
    """~200-bit structural-key spec: element-count thresholds, ring counts,
    and common linear substructure paths."""
    bits: list[object] = []
    thresholds = {
        "C": (2, 4, 8, 16, 32), "N": (1, 2, 4, 8), "O": (1, 2, 4, 8, 16),
        "S": (1, 2, 4, 8), "P": (1, 2, 4), "F": (1, 2, 4),
        "Cl": (1, 2, 4, 8), "Br": (1, 2, 4), "I": (1, 2, 4),
        "B": (1, 2, 4), "Sn": (1,), "Hg": (1,), "Sc": (1,),
    }
    for element, counts in thresholds.items():
        for c in counts:
            bits.append(CountBit(element, c))
    for size in (3, 4, 5, 6, 7, 8):
        for count in (1, 2, 3, 4, 5):
            bits.append(RingBit(size, count, "any"))
        for kind in ("aromatic", "carbon", "hetero"):
            for count in (1, 2):
                bits.append(RingBit(size, count, kind))
    paths = [
        "C-C", "C=C", "C#C", "C-N", "C=N", "C#N", "C-O", "C=O", "C-S",
        "C-Cl", "C-Br", "C-F", "C-I", "N-O", "N=O", "N-N", "S=O", "O-O",
        "C-C-C", "C-C-N", "C-C-O", "C-C=O", "O=C-N", "O=C-O", "O=C-C-O",
        "O=C-C-N", "N-C-N", "O-C-O", "C-N-C", "C-O-C", "C-S-C", "N-C=O",
        "C-C-C-C", "C-C-C-O", "C-C-C-N", "O=C-C-C", "C-C-O-C", "C-N-C-C",
        "C-C-C-C-C", "C-C-C-C-O", "C-C-C-C-N", "C-C-C-C-C-C",
        "O-C-C-C-C-C", "C-C-C-C-C-C-C", "C-C-C-C-C-C-C-C",
        "O-C-C-C-C-C-C-C", "N-C-C-C-C-C-C-C",
        "c:c", "c:n", "c:o", "c:s", "n:n", "c:c:c", "c:c:n",
        "C-c:c", "N-c:c", "O-c:c", "Cl-c:c", "c:c:c:c", "c:c:c:c:c:c",
    ]
    bits.extend(parse_path_pattern(p) for p in paths)
    return FingerprintSpec("v1", tuple(bits))


def _match_path(g: MolecularGraph, elements, orders) -> bool:
    """Depth-first simple-path match with exact element/bond-order sequence."""
    def matches_atom(idx: int, pos: int) -> bool:
        pattern = elements[pos]
        atom = g.atoms[idx]
        if pattern.islower():
            return atom.element == pattern.capitalize() and atom.aromatic
        return atom.element == pattern

    def matches_bond(bond: chem.Bond, order) -> bool:
        if order == "any":
            return True
        if order == "a":
            return bond.aromatic
        return bond.order == order and not bond.aromatic

    def walk(idx: int, pos: int, visited: set[int]) -> bool:
        if pos == len(elements) - 1:
            return True
        for b in g.adjacency[idx]:
            bond = g.bonds[b]
            nxt = bond.other(idx)
            if nxt in visited or not matches_bond(bond, orders[pos]):
                continue
            if matches_atom(nxt, pos + 1):
                if walk(nxt, pos + 1, visited | {nxt}):
                    return True
        return False

    for variant in ((elements, orders), (elements[::-1], orders[::-1])):
        elements, orders = variant
        for start in range(len(g.atoms)):
            if matches_atom(start, 0) and walk(start, 0, {start}):
                return True
    return False


def compute_fingerprint(g: MolecularGraph, spec: FingerprintSpec) -> np.ndarray:
    element_counts: dict[str, int] = {}
    for a in g.atoms:
        element_counts[a.element] = element_counts.get(a.element, 0) + 1
    rings = chem.cycle_basis(g)
    out = np.zeros(len(spec.bits), dtype=bool)
    for i, bit in enumerate(spec.bits):
        if isinstance(bit, CountBit):
            out[i] = element_counts.get(bit.element, 0) >= bit.min_count
        elif isinstance(bit, RingBit):
            out[i] = _count_rings(g, rings, bit.size, bit.kind) >= bit.min_count
        else:
            out[i] = _match_path(g, bit.elements, bit.orders)
    return out


def _count_rings(g: MolecularGraph, rings, size: int, kind: str) -> int:
    count = 0
    for ring in rings:
        if len(ring) != size:
            continue
        atoms = [g.atoms[i] for i in ring]
        if kind == "aromatic" and not all(a.aromatic for a in atoms):
            continue
        if kind == "carbon" and not all(a.element == "C" for a in atoms):
            continue
        if kind == "hetero" and all(a.element == "C" for a in atoms):
            continue
        count += 1
    return count


# ---------------------------------------------------------------------------
# SMILES n-grams


@dataclass(frozen=True)
class NGramVocabulary:
    index: dict[str, int]
    n_max: int
    min_count: int

    def __len__(self) -> int:
        return len(self.index)

    def serialize(self) -> str:
        lines = [f"ngram-vocabulary v1 n_max={self.n_max} "
                 f"min_count={self.min_count}"]
        for token, idx in sorted(self.index.items(), key=lambda kv: kv[1]):
            lines.append(f"{idx}\t{token}")
        return "\n".join(lines) + "\n"

    @classmethod
    def deserialize(cls, text: str) -> "NGramVocabulary":
        lines = text.splitlines()
        header = lines[0].split()
        if header[0] != "ngram-vocabulary":
            raise ValueError("not an n-gram vocabulary file")
        kv = dict(f.split("=") for f in header[2:])
        index = {}
        for line in lines[1:]:
            if not line:
                continue
            idx, token = line.split("\t", 1)
            index[token] = int(idx)
        return cls(index, int(kv["n_max"]), int(kv["min_count"]))


def iter_ngrams(text: str, n_max: int) -> Iterable[str]:
    for n in range(1, n_max + 1):
        for i in range(len(text) - n + 1):
            yield text[i : i + n]


def build_ngram_vocabulary(
    corpus: Sequence[str], n_max: int = 4, min_count: int = 5
) -> NGramVocabulary:
    """Vocabulary of character substrings (length 1..n_max) occurring at
    least ``min_count`` times in the corpus; indices are lexicographic."""
    if not corpus:
        raise ValueError("empty corpus")
    counts: dict[str, int] = {}
    for text in corpus:
        for gram in iter_ngrams(text, n_max):
            counts[gram] = counts.get(gram, 0) + 1
    kept = sorted(g for g, c in counts.items() if c >= min_count)
    if not kept:
        log.warning("n-gram vocabulary is empty (min_count=%d)", min_count)
    return NGramVocabulary({g: i for i, g in enumerate(kept)}, n_max, min_count)


def smiles_ngrams(text: str, vocab: NGramVocabulary) -> np.ndarray:
    out = np.zeros(len(vocab), dtype=float)
    for gram in iter_ngrams(text, vocab.n_max):
        idx = vocab.index.get(gram)
        if idx is not None:
            out[idx] += 1.0
    return out


# ---------------------------------------------------------------------------
# novelty distance and complexity


def jaccard_distances(x: np.ndarray, train: np.ndarray) -> np.ndarray:
    """Jaccard distance from bit vector ``x`` to every row of ``train``.

    All-zero pairs have distance 0 by convention.
    """
    x = np.asarray(x, dtype=bool)
    train = np.asarray(train, dtype=bool)
    inter = (train & x).sum(axis=1)
    union = (train | x).sum(axis=1)
    with np.errstate(invalid="ignore"):
        dist = 1.0 - inter / union
    dist[union == 0] = 0.0
    return dist


def jaccard_knn_distance(x: np.ndarray, train: np.ndarray, k: int = 5) -> float:
    """Mean Jaccard distance to the k nearest training vectors.

    Ties at the k-th neighbor are broken by training index (stable sort).
    """
    if len(train) == 0:
        raise ValueError("empty training set")
    if k > len(train):
        raise ValueError(f"k={k} exceeds training size {len(train)}")
    dist = jaccard_distances(x, train)
    order = np.argsort(dist, kind="stable")
    return float(dist[order[:k]].mean())


def complexity(x: np.ndarray) -> int:
    """Number of set bits in the fingerprint."""
    return int(np.asarray(x, dtype=bool).sum())
