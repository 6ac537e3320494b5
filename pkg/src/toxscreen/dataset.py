"""Assay-table ingestion from CSV and train/valid/test splitting.

Labels are three-valued: active (1), inactive (0), missing (-1).  Rows whose
SMILES fail to parse are dropped with a logged warning, never imputed.
Three split strategies are provided: by row index, uniformly at random, and
by scaffold (molecules sharing a scaffold never span folds).
"""

from __future__ import annotations

import csv
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import chem
from .chem import MolecularGraph

log = logging.getLogger(__name__)

MISSING = -1
TRAIN, VALID, TEST = 0, 1, 2
FOLD_NAMES = ("train", "valid", "test")

_MAGIC = b"ATBL0001"


class LoadError(ValueError):
    pass


@dataclass
class AssayTable:
    ids: list[str]
    smiles: list[str]
    graphs: list[MolecularGraph]
    targets: list[str]
    families: list[str | None]
    labels: np.ndarray  # (n_molecules, n_targets) int8, -1 = missing

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int8)
        if self.labels.shape != (len(self.smiles), len(self.targets)):
            raise ValueError("label matrix shape mismatch")

    @property
    def n_molecules(self) -> int:
        return len(self.smiles)

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def subset(self, rows: np.ndarray) -> "AssayTable":
        rows = list(np.asarray(rows))
        return AssayTable(
            [self.ids[i] for i in rows],
            [self.smiles[i] for i in rows],
            [self.graphs[i] for i in rows],
            list(self.targets),
            list(self.families),
            self.labels[rows],
        )


def load_csv(
    path: str | Path,
    smiles_column: str,
    target_columns: Sequence[str],
    id_column: str | None = None,
    families: dict[str, str] | None = None,
) -> AssayTable:
    """Load a molecules x targets CSV: "1" active, "0" inactive, empty missing."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise LoadError(f"{path}: empty file")
        for col in [smiles_column, *target_columns]:
            if col not in reader.fieldnames:
                raise LoadError(f"{path}: column not found: {col!r}")
        if id_column is not None and id_column not in reader.fieldnames:
            raise LoadError(f"{path}: column not found: {id_column!r}")
        ids, smiles, graphs, rows = [], [], [], []
        for lineno, record in enumerate(reader, start=2):
            text = record[smiles_column]
            try:
                graph = chem.parse_smiles(text)
            except chem.ParseError as exc:
                log.warning("%s line %d: dropping unparseable SMILES %r (%s)",
                            path, lineno, text, exc)
                continue
            labels = []
            for col in target_columns:
                cell = (record[col] or "").strip()
                if cell == "":
                    labels.append(MISSING)
                elif cell in ("0", "1", "0.0", "1.0"):
                    labels.append(int(float(cell)))
                else:
                    raise LoadError(
                        f"{path} line {lineno}, column {col!r}: "
                        f"expected 0, 1 or empty, got {cell!r}"
                    )
            ids.append(record[id_column] if id_column else str(len(ids)))
            smiles.append(text)
            graphs.append(graph)
            rows.append(labels)
    if not smiles:
        raise LoadError(f"{path}: no usable rows")
    fams = [families.get(t) if families else None for t in target_columns]
    return AssayTable(ids, smiles, graphs, list(target_columns), fams,
                      np.array(rows, dtype=np.int8))


def save_table(table: AssayTable, path: str | Path) -> None:
    """Native persistence: magic bytes, length-prefixed JSON schema block,
    then the label matrix row-major as int8."""
    header = json.dumps({
        "ids": table.ids,
        "smiles": table.smiles,
        "targets": table.targets,
        "families": table.families,
        "shape": list(table.labels.shape),
    }).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(table.labels.astype(np.int8).tobytes())


def load_table(path: str | Path) -> AssayTable:
    with Path(path).open("rb") as fh:
        if fh.read(8) != _MAGIC:
            raise LoadError(f"{path}: bad magic bytes")
        (size,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(size).decode("utf-8"))
        labels = np.frombuffer(fh.read(), dtype=np.int8).reshape(header["shape"])
    graphs = [chem.parse_smiles(s) for s in header["smiles"]]
    return AssayTable(header["ids"], header["smiles"], graphs,
                      header["targets"], header["families"], labels.copy())


@dataclass
class SplitAssignment:
    folds: np.ndarray  # int8 per molecule: TRAIN / VALID / TEST
    seed: int | None
    strategy: str

    def indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)


def _check_fractions(fractions: Sequence[float]) -> tuple[float, float, float]:
    if len(fractions) != 3 or abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError("fractions must be three values summing to 1")
    return tuple(fractions)  # type: ignore[return-value]


def split_index(
    table: AssayTable, fractions: Sequence[float] = (0.8, 0.1, 0.1)
) -> SplitAssignment:
    """First floor(f_train*N) rows train, next floor(f_valid*N) valid, rest test."""
    f_train, f_valid, _ = _check_fractions(fractions)
    n = table.n_molecules
    if n < 3:
        raise ValueError(f"cannot split {n} molecules into three folds")
    n_train = int(f_train * n)
    n_valid = int(f_valid * n)
    folds = np.full(n, TEST, dtype=np.int8)
    folds[:n_train] = TRAIN
    folds[n_train : n_train + n_valid] = VALID
    if n_valid == 0 or n_train + n_valid == n:
        log.warning("index split leaves an empty fold (N=%d)", n)
    return SplitAssignment(folds, None, "index")


def split_random(
    table: AssayTable,
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitAssignment:
    """Seeded uniform shuffle followed by an index split of the shuffled order."""
    _check_fractions(fractions)
    n = table.n_molecules
    if n < 3:
        raise ValueError(f"cannot split {n} molecules into three folds")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = split_index(table, fractions)
    folds = np.empty(n, dtype=np.int8)
    folds[order] = shuffled.folds
    return SplitAssignment(folds, seed, "random")


def scaffold_groups(table: AssayTable) -> dict[str, list[int]]:
    groups: dict[str, list[int]] = {}
    for i, g in enumerate(table.graphs):
        key = chem.canonical_key(chem.murcko_scaffold(g))
        groups.setdefault(key, []).append(i)
    return groups


def split_scaffold(
    table: AssayTable,
    fractions: Sequence[float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> SplitAssignment:
    """Greedy largest-first assignment of scaffold groups to folds.

    Groups are ordered by descending size with ties broken by key, then
    reshuffled within equal-size blocks by the seed; each group goes to the
    fold currently furthest below its target count (train wins ties).  No
    scaffold ever spans folds.
    """
    fracs = _check_fractions(fractions)
    n = table.n_molecules
    groups = scaffold_groups(table)
    if len(groups) == 1:
        log.warning("single scaffold group; all molecules assigned to train")
        return SplitAssignment(np.zeros(n, dtype=np.int8), seed, "scaffold")
    ordered = sorted(groups.items(), key=lambda kv: (-len(kv[1]), kv[0]))
    rng = np.random.default_rng(seed)
    shuffled: list[tuple[str, list[int]]] = []
    block: list[tuple[str, list[int]]] = []
    last_size = None
    for item in [*ordered, None]:
        size = len(item[1]) if item else None
        if size != last_size and block:
            idx = rng.permutation(len(block))
            shuffled.extend(block[i] for i in idx)
            block = []
        if item:
            block.append(item)
        last_size = size
    targets = [f * n for f in fracs]
    fill = [0, 0, 0]
    folds = np.empty(n, dtype=np.int8)
    for _, members in shuffled:
        deficits = [targets[f] - fill[f] for f in (TRAIN, VALID, TEST)]
        fold = max((TRAIN, VALID, TEST), key=lambda f: (deficits[f], -f))
        folds[members] = fold
        fill[fold] += len(members)
    return SplitAssignment(folds, seed, "scaffold")


def positives_per_target(table: AssayTable) -> np.ndarray:
    return (table.labels == 1).sum(axis=0)
