"""SMILES tokenization and parsing into molecular graphs.

Supports the organic subset, bracket atoms (isotope, charge, explicit H),
aromatic lowercase atoms, branches, and single- or two-digit (``%nn``) ring
closures.  Stereo markers (``/ \\ @``) are accepted and discarded: nothing
downstream consumes stereochemistry.  Aromaticity is taken from lowercase
input and never re-perceived.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import networkx as nx

# Standard valences used for implicit-hydrogen assignment.  Multi-valent
# elements list alternatives in increasing order; the lowest that fits is used.
STANDARD_VALENCES: dict[str, tuple[int, ...]] = {
    "B": (3,),
    "C": (4,),
    "N": (3,),
    "O": (2,),
    "P": (3, 5),
    "S": (2, 4, 6),
    "F": (1,),
    "Cl": (1,),
    "Br": (1,),
    "I": (1,),
}

ORGANIC_SUBSET = ("Cl", "Br", "B", "C", "N", "O", "P", "S", "F", "I")
AROMATIC_ORGANIC = ("b", "c", "n", "o", "p", "s")

# Elements recognized inside bracket atoms (two-letter symbols first so the
# scanner prefers the longest match).
_ELEMENTS = (
    "Cl", "Br", "Si", "Se", "Na", "Li", "Mg", "Ca", "Fe", "Zn", "Cu", "Mn",
    "Sn", "Hg", "Sc", "Al", "As", "Ag", "Au", "Pt", "Pb", "Cd", "Cr", "Co",
    "Ni", "Ti", "Ba", "Bi", "Sr", "Sb", "Te", "Ge", "Mo", "Zr", "Cs", "Rb",
    "Be", "Ne", "Ar", "Kr", "Xe", "He",
    "B", "C", "N", "O", "P", "S", "F", "I", "H", "K", "V", "W", "U",
)


class ParseError(ValueError):
    """Raised for malformed SMILES; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Token:
    kind: str  # "atom" | "bond" | "open" | "close" | "ring" | "dot"
    lexeme: str
    offset: int
    # atom fields
    element: str | None = None
    aromatic: bool = False
    charge: int = 0
    explicit_h: int | None = None  # None: not a bracket atom
    isotope: int | None = None
    # ring-closure field
    ring_index: int | None = None
    # bond field: 1, 2, 3 or "aromatic"; stereo bonds normalize to 1
    order: object | None = None


@dataclass
class Atom:
    element: str
    aromatic: bool = False
    charge: int = 0
    isotope: int | None = None
    explicit_h: int | None = None  # H count given in brackets, else None
    implicit_h: int = 0
    in_ring: bool = False


@dataclass
class Bond:
    a: int
    b: int
    order: int = 1  # 1, 2, 3; aromatic bonds carry order 1 plus the flag
    aromatic: bool = False
    in_ring: bool = False

    def other(self, idx: int) -> int:
        return self.b if idx == self.a else self.a


@dataclass
class MolecularGraph:
    atoms: list[Atom] = field(default_factory=list)
    bonds: list[Bond] = field(default_factory=list)

    def __post_init__(self):
        self._adj: list[list[int]] | None = None

    @property
    def adjacency(self) -> list[list[int]]:
        """Atom index -> incident bond indices."""
        if self._adj is None:
            adj: list[list[int]] = [[] for _ in self.atoms]
            for i, bond in enumerate(self.bonds):
                adj[bond.a].append(i)
                adj[bond.b].append(i)
            self._adj = adj
        return self._adj

    def degree(self, idx: int) -> int:
        return len(self.adjacency[idx])

    def neighbors(self, idx: int) -> list[int]:
        return [self.bonds[b].other(idx) for b in self.adjacency[idx]]

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(len(self.atoms)))
        g.add_edges_from((b.a, b.b) for b in self.bonds)
        return g

    def subgraph(self, keep: list[int]) -> "MolecularGraph":
        """Induced subgraph with atoms re-indexed in the order of ``keep``."""
        index = {old: new for new, old in enumerate(keep)}
        atoms = [
            Atom(a.element, a.aromatic, a.charge, a.isotope, a.explicit_h,
                 a.implicit_h, a.in_ring)
            for a in (self.atoms[i] for i in keep)
        ]
        bonds = [
            Bond(index[b.a], index[b.b], b.order, b.aromatic, b.in_ring)
            for b in self.bonds
            if b.a in index and b.b in index
        ]
        return MolecularGraph(atoms, bonds)


_BOND_ORDERS = {"-": 1, "=": 2, "#": 3, ":": "aromatic", "/": 1, "\\": 1}


def tokenize_smiles(text: str) -> list[Token]:
    """Lex a SMILES string; concatenated lexemes reproduce the input."""
    if not text:
        raise ParseError("empty SMILES", 0)
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            j = text.find("]", i)
            if j < 0:
                raise ParseError("unterminated bracket atom", i)
            tokens.append(_lex_bracket(text[i : j + 1], i))
            i = j + 1
        elif ch == "(":
            tokens.append(Token("open", ch, i))
            i += 1
        elif ch == ")":
            tokens.append(Token("close", ch, i))
            i += 1
        elif ch == ".":
            tokens.append(Token("dot", ch, i))
            i += 1
        elif ch in _BOND_ORDERS:
            tokens.append(Token("bond", ch, i, order=_BOND_ORDERS[ch]))
            i += 1
        elif ch == "%":
            if i + 2 >= n or not text[i + 1 : i + 3].isdigit():
                raise ParseError("malformed %nn ring closure", i)
            tokens.append(
                Token("ring", text[i : i + 3], i, ring_index=int(text[i + 1 : i + 3]))
            )
            i += 3
        elif ch.isdigit():
            tokens.append(Token("ring", ch, i, ring_index=int(ch)))
            i += 1
        elif text[i : i + 2] in ("Cl", "Br"):
            tokens.append(Token("atom", text[i : i + 2], i, element=text[i : i + 2]))
            i += 2
        elif ch in "BCNOPSFI":
            tokens.append(Token("atom", ch, i, element=ch))
            i += 1
        elif ch in AROMATIC_ORGANIC:
            tokens.append(Token("atom", ch, i, element=ch.upper(), aromatic=True))
            i += 1
        else:
            raise ParseError(f"unknown symbol {ch!r}", i)
    return tokens


def _lex_bracket(lexeme: str, offset: int) -> Token:
    """Lex a bracket atom ``[isotope? symbol chirality? Hcount? charge?]``."""
    body = lexeme[1:-1]
    i = 0
    isotope = None
    start = i
    while i < len(body) and body[i].isdigit():
        i += 1
    if i > start:
        isotope = int(body[start:i])
    element = None
    aromatic = False
    for sym in _ELEMENTS:
        if body[i : i + len(sym)] == sym:
            element = sym
            i += len(sym)
            break
    if element is None:
        low = body[i : i + 1]
        if low in AROMATIC_ORGANIC:
            element = low.upper()
            aromatic = True
            i += 1
        elif body[i : i + 2] in ("se", "as"):
            element = body[i : i + 2].capitalize()
            aromatic = True
            i += 2
        elif low == "*":
            element = "*"
            i += 1
        else:
            raise ParseError(f"unknown element in bracket atom {lexeme!r}", offset)
    # chirality markers are parsed and discarded
    while i < len(body) and body[i] == "@":
        i += 1
    if body[i : i + 2] in ("TH", "AL", "SP", "TB", "OH"):
        i += 2
        while i < len(body) and body[i].isdigit():
            i += 1
    explicit_h = 0
    if i < len(body) and body[i] == "H" and element != "H":
        i += 1
        start = i
        while i < len(body) and body[i].isdigit():
            i += 1
        explicit_h = int(body[start:i]) if i > start else 1
    charge = 0
    if i < len(body) and body[i] in "+-":
        sign = 1 if body[i] == "+" else -1
        run = 0
        while i < len(body) and body[i] in "+-":
            run += 1
            i += 1
        start = i
        while i < len(body) and body[i].isdigit():
            i += 1
        charge = sign * (int(body[start:i]) if i > start else run)
    if i < len(body) and body[i] == ":":  # atom-map number, discarded
        i += 1
        while i < len(body) and body[i].isdigit():
            i += 1
    if i != len(body):
        raise ParseError(f"trailing characters in bracket atom {lexeme!r}", offset)
    return Token(
        "atom", lexeme, offset,
        element=element, aromatic=aromatic, charge=charge,
        explicit_h=explicit_h, isotope=isotope,
    )


def parse_smiles(text: str) -> MolecularGraph:
    """Parse SMILES into a molecular graph.

    Multi-fragment inputs keep the largest fragment by atom count, ties
    broken by lexicographic canonical key.  Implicit hydrogens are assigned
    by standard valence; bracket atoms use their stated H count verbatim.
    """
    tokens = tokenize_smiles(text)
    g = MolecularGraph()
    prev: int | None = None
    pending: object | None = None  # bond order awaiting the next atom
    pending_offset = 0
    stack: list[int | None] = []
    open_rings: dict[int, tuple[int, object | None, int]] = {}
    fragment: list[int] = []  # fragment id per atom
    frag = 0
    for tok in tokens:
        if tok.kind == "atom":
            idx = len(g.atoms)
            g.atoms.append(
                Atom(tok.element, tok.aromatic, tok.charge, tok.isotope,
                     tok.explicit_h)
            )
            fragment.append(frag)
            if prev is not None:
                g.bonds.append(_make_bond(g, prev, idx, pending))
            prev = idx
            pending = None
        elif tok.kind == "bond":
            pending = tok.order
            pending_offset = tok.offset
        elif tok.kind == "open":
            if prev is None:
                raise ParseError("branch before any atom", tok.offset)
            stack.append(prev)
        elif tok.kind == "close":
            if not stack:
                raise ParseError("unmatched ')'", tok.offset)
            prev = stack.pop()
        elif tok.kind == "ring":
            if prev is None:
                raise ParseError("ring closure before any atom", tok.offset)
            num = tok.ring_index
            if num in open_rings:
                other, other_order, _ = open_rings.pop(num)
                order = pending if pending is not None else other_order
                if other == prev:
                    raise ParseError("ring closure bonds atom to itself", tok.offset)
                g.bonds.append(_make_bond(g, other, prev, order))
                pending = None
            else:
                open_rings[num] = (prev, pending, tok.offset)
                pending = None
        elif tok.kind == "dot":
            prev = None
            pending = None
            frag += 1
    if stack:
        raise ParseError("unclosed branch", len(text))
    if open_rings:
        num, (_, _, offset) = next(iter(open_rings.items()))
        raise ParseError(f"unmatched ring closure {num}", offset)
    if pending is not None:
        raise ParseError("dangling bond symbol", pending_offset)
    seen = {(min(b.a, b.b), max(b.a, b.b)) for b in g.bonds}
    if len(seen) != len(g.bonds):
        raise ParseError("duplicate bond", 0)
    _mark_rings(g)
    _assign_implicit_hydrogens(g)
    if frag > 0:
        g = _largest_fragment(g)
    return g


def _make_bond(g: MolecularGraph, a: int, b: int, order: object | None) -> Bond:
    if order is None:
        if g.atoms[a].aromatic and g.atoms[b].aromatic:
            return Bond(a, b, 1, aromatic=True)
        return Bond(a, b, 1)
    if order == "aromatic":
        return Bond(a, b, 1, aromatic=True)
    return Bond(a, b, int(order))


def _mark_rings(g: MolecularGraph) -> None:
    nxg = g.to_networkx()
    bridges = set(nx.bridges(nxg))
    bridges |= {(b, a) for a, b in bridges}
    for bond in g.bonds:
        bond.in_ring = (bond.a, bond.b) not in bridges
        if bond.in_ring:
            g.atoms[bond.a].in_ring = True
            g.atoms[bond.b].in_ring = True


def _assign_implicit_hydrogens(g: MolecularGraph) -> None:
    for idx, atom in enumerate(g.atoms):
        if atom.explicit_h is not None:  # bracket atom: H count is verbatim
            atom.implicit_h = atom.explicit_h
            continue
        used = sum(g.bonds[b].order for b in g.adjacency[idx])
        # Lowercase aromatic atoms reserve one unit for the delocalized
        # system; each aromatic bond counts as a single toward valence.
        bonus = 1 if atom.aromatic else 0
        valences = STANDARD_VALENCES.get(atom.element)
        if valences is None:
            atom.implicit_h = 0
            continue
        for val in valences:
            if used + bonus <= val:
                atom.implicit_h = val - used - bonus
                break
        else:
            if used > valences[-1]:
                raise ParseError(
                    f"valence {used} impossible for {atom.element}", 0
                )
            atom.implicit_h = 0


def _largest_fragment(g: MolecularGraph) -> MolecularGraph:
    comps = [sorted(c) for c in nx.connected_components(g.to_networkx())]
    if len(comps) <= 1:
        return g
    best = None
    best_key = None
    for comp in comps:
        sub = g.subgraph(comp)
        key = (-len(comp), canonical_key(sub))
        if best_key is None or key < best_key:
            best, best_key = sub, key
    return best


def murcko_scaffold(g: MolecularGraph) -> MolecularGraph:
    """Ring systems plus their linkers, with terminal side chains removed.

    Side chains are pruned by iteratively deleting degree-1 atoms that are
    not ring members; atoms attached to the retained frame by a double or
    triple bond are then restored.  Acyclic input yields the empty graph.
    """
    alive = set(range(len(g.atoms)))
    degree = {i: g.degree(i) for i in alive}
    changed = True
    while changed:
        changed = False
        for i in sorted(alive):
            if degree[i] <= 1 and not g.atoms[i].in_ring:
                alive.discard(i)
                for j in g.neighbors(i):
                    if j in alive:
                        degree[j] -= 1
                changed = True
    if not alive:
        return MolecularGraph()
    restored = set()
    for bond in g.bonds:
        if bond.order >= 2:
            if bond.a in alive and bond.b not in alive:
                restored.add(bond.b)
            elif bond.b in alive and bond.a not in alive:
                restored.add(bond.a)
    scaffold = g.subgraph(sorted(alive | restored))
    _renormalize_hydrogens(scaffold)
    return scaffold


def _renormalize_hydrogens(g: MolecularGraph) -> None:
    """Recompute implicit H from the remaining bonds so that, e.g., the
    scaffold of ethylbenzene is indistinguishable from parsed benzene."""
    for idx, atom in enumerate(g.atoms):
        used = sum(g.bonds[b].order for b in g.adjacency[idx])
        bonus = 1 if atom.aromatic else 0
        atom.explicit_h = None
        atom.implicit_h = 0
        for val in STANDARD_VALENCES.get(atom.element, ()):
            if used + bonus <= val:
                atom.implicit_h = val - used - bonus
                break


def ring_sizes(g: MolecularGraph) -> list[int]:
    """Sizes of a minimum cycle basis, ascending."""
    return sorted(len(c) for c in cycle_basis(g))


def cycle_basis(g: MolecularGraph) -> list[list[int]]:
    """Minimum cycle basis as lists of atom indices."""
    return [list(c) for c in nx.minimum_cycle_basis(g.to_networkx())]


def _dense_ranks(keys: list) -> list[int]:
    order = {k: i for i, k in enumerate(sorted(set(keys)))}
    return [order[k] for k in keys]


def canonical_key(g: MolecularGraph) -> str:
    """Relabel-invariant key from Morgan-style neighborhood refinement.

    Atom invariants are iteratively refined by sorted neighbor invariants
    until the partition stabilizes; the key serializes the multiset of atom
    classes and of edges between classes.  Equal up to atom relabeling
    implies equal keys; the empty graph maps to "".
    """
    n = len(g.atoms)
    if n == 0:
        return ""
    inv = [
        (a.element, a.aromatic, a.charge, g.degree(i), a.implicit_h)
        for i, a in enumerate(g.atoms)
    ]
    ranks = _dense_ranks(inv)
    n_classes = len(set(ranks))
    for _ in range(n):
        refined = []
        for i in range(n):
            env = sorted(
                (g.bonds[b].order, g.bonds[b].aromatic, ranks[g.bonds[b].other(i)])
                for b in g.adjacency[i]
            )
            refined.append((ranks[i], tuple(env)))
        new_ranks = _dense_ranks(refined)
        new_count = len(set(new_ranks))
        if new_count == n_classes:
            break
        ranks, n_classes = new_ranks, new_count
    atom_part = sorted(f"{ranks[i]}:{inv[i][0]}{'~' if inv[i][1] else ''}"
                       f"{inv[i][2]:+d}" for i in range(n))
    edge_part = sorted(
        f"{min(ranks[b.a], ranks[b.b])}-{max(ranks[b.a], ranks[b.b])}"
        f"{'~' if b.aromatic else ''}x{b.order}"
        for b in g.bonds
    )
    return f"{n}|{','.join(atom_part)}|{','.join(edge_part)}"


def distance_matrix(g: MolecularGraph) -> dict[int, dict[int, int]]:
    """All-pairs shortest-path lengths over heavy atoms (per component)."""
    return dict(nx.all_pairs_shortest_path_length(g.to_networkx()))


def largest_component(g: MolecularGraph) -> MolecularGraph:
    comps = [sorted(c) for c in nx.connected_components(g.to_networkx())]
    if len(comps) <= 1:
        return g
    comps.sort(key=len, reverse=True)
    return g.subgraph(comps[0])
