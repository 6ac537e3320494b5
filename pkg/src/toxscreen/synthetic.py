"""Deterministic synthetic screening datasets with planted rules.

Molecules are assembled from a pool of ring scaffolds plus aliphatic
prefixes/suffixes; labels follow simple descriptor and substructure rules
so that every feature family carries signal.  Used by the demo pipeline
and the verification suite.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from . import chem, featurize
from .dataset import AssayTable, MISSING

TARGETS = ("T_weight", "T_aromatic", "T_halogen")
FAMILIES = {"T_weight": "Nuclear Receptor", "T_aromatic": "Cell Cycle",
            "T_halogen": "Stress Response"}


def scaffold_pool() -> list[str]:
    """Parseable scaffold SMILES with pairwise-distinct canonical keys."""
    candidates: list[str] = []
    aromatic6 = ["cccccc", "ccnccc", "ccncnc", "cnccnc", "ccccnc"]
    for body in aromatic6:
        candidates.append(f"{body[0]}1{body[1:]}1")
    for hetero in ("o", "s", "[nH]"):
        candidates.append(f"c1cc{hetero}c1")
        candidates.append(f"c1cc{hetero}cc1" if hetero != "[nH]" else "c1cc[nH]cc1")
    for size in (3, 4, 5, 6, 7, 8):
        body = "C" * size
        candidates.append(f"C1{body[1:]}1")
        for hetero in ("N", "O", "S"):
            if size >= 4:
                candidates.append(f"C1{hetero}{body[2:]}1")
        if size >= 5:
            candidates.append(f"C1N{'C' * (size - 4)}NC1")
            candidates.append(f"C1O{'C' * (size - 4)}OC1")
    # exocyclic-carbonyl variants survive scaffold extraction
    for ring in ("C1CCCC1", "C1CCCCC1", "C1CCNCC1", "C1CCOCC1", "C1CCCCCC1"):
        candidates.append("O=" + ring)
    candidates += [
        "c1ccc2ccccc2c1", "c1ccc2ncccc2c1", "C1CCC2CCCCC2C1",
        "c1ccc(-c2ccccc2)cc1", "c1ccc(-c2ccncc2)cc1", "C1CCC(C2CCCCC2)CC1",
        "c1ccc(CC2CCCCC2)cc1", "c1ccc(CCc2ccccc2)cc1",
        "c1ccc(-c2ccco2)cc1", "c1ccc(-c2cccs2)cc1",
        "O=C1CCCN1", "O=C1CCCO1", "O=C1CCCCN1", "O=C1CCCCO1",
        "C1CC2CCC1CC2", "c1cnc2ccccc2c1",
    ]
    pool: list[str] = []
    seen: set[str] = set()
    for smiles in candidates:
        try:
            key = chem.canonical_key(chem.parse_smiles(smiles))
        except chem.ParseError:
            continue
        if key not in seen:
            seen.add(key)
            pool.append(smiles)
    return pool


PREFIXES = ("", "", "C", "CC", "CCC", "CCCC", "CCCCCC", "CCO", "CCN", "OC",
            "NC", "CC(C)", "CC(=O)", "CCOC", "CC(C)C", "CCNC", "OCC")
SUFFIXES = ("", "", "C", "CC", "CCC", "CO", "CN", "C(=O)O", "CCl",
            "C(Cl)Cl", "CCCl", "CBr", "CF", "C(F)F", "CCBr", "CCl")


def random_smiles(rng: np.random.Generator, pool: list[str] | None = None,
                  acyclic_rate: float = 0.1) -> str:
    pool = pool if pool is not None else scaffold_pool()
    prefix = PREFIXES[rng.integers(len(PREFIXES))]
    suffix = SUFFIXES[rng.integers(len(SUFFIXES))]
    if rng.random() < acyclic_rate:
        core = "C" * int(rng.integers(1, 6))
    else:
        core = pool[rng.integers(len(pool))]
    return prefix + core + suffix


def planted_labels(graph: chem.MolecularGraph) -> list[int]:
    """Rules visible to every feature family: molecular weight, aromatic
    ring presence, and halogenation."""
    weight = featurize.molecular_weight(graph)
    aromatic = any(a.aromatic for a in graph.atoms)
    halogens = featurize.halogen_count(graph)
    return [int(weight > 130.0), int(aromatic), int(halogens >= 1)]


def make_table(n: int, seed: int = 0, missing_rate: float = 0.1) -> AssayTable:
    rng = np.random.default_rng(seed)
    pool = scaffold_pool()
    ids, smiles, graphs, labels = [], [], [], []
    while len(smiles) < n:
        text = random_smiles(rng, pool)
        try:
            graph = chem.parse_smiles(text)
        except chem.ParseError:
            continue
        row = planted_labels(graph)
        for t in range(len(row)):
            if rng.random() < missing_rate:
                row[t] = MISSING
        ids.append(f"MOL{len(smiles):05d}")
        smiles.append(text)
        graphs.append(graph)
        labels.append(row)
    return AssayTable(ids, smiles, graphs, list(TARGETS),
                      [FAMILIES[t] for t in TARGETS],
                      np.array(labels, dtype=np.int8))


def write_csv(table: AssayTable, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mol_id", "smiles", *table.targets])
        for i in range(table.n_molecules):
            cells = ["" if v == MISSING else str(int(v))
                     for v in table.labels[i]]
            writer.writerow([table.ids[i], table.smiles[i], *cells])
