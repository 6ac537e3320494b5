"""Combine member-model scores into the final predictor.

The blender is a boosted-tree model over stacked (member scores + task id)
rows, constrained to be monotonically non-decreasing in every member score
and unconstrained in the task id.  Member scores used for blend training
must come from the validation fold, produced by models that never saw it;
an internal 80/20 sub-split of that data drives early stopping.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import gbm

log = logging.getLogger(__name__)


@dataclass
class BlendModel:
    member_names: list[str]  # manifest order, immutable per blend model
    booster: gbm.BoostedModel

    def __post_init__(self):
        expected = [1] * len(self.member_names) + [0]
        if self.booster.monotone != expected:
            raise ValueError("blend booster monotone spec must be +1 on every "
                             "member score and 0 on the task id")


def prediction_average(scores: np.ndarray) -> np.ndarray:
    """Arithmetic mean over member scores (last axis)."""
    scores = np.asarray(scores, dtype=float)
    if scores.shape[-1] == 0:
        raise ValueError("empty member list")
    return scores.mean(axis=-1)


def _stack_member_scores(
    member_scores: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """member_scores: (n_molecules, n_targets, n_members); labels with -1
    missing.  Returns stacked rows (scores + task id) and binary labels."""
    mols, tasks = np.nonzero(labels >= 0)
    X = np.column_stack([member_scores[mols, tasks], tasks.astype(float)])
    y = labels[mols, tasks].astype(float)
    return X, y


def train_blend(
    member_scores: np.ndarray,
    labels: np.ndarray,
    member_names: list[str],
    config: gbm.GbmConfig | None = None,
    seed: int = 0,
) -> BlendModel:
    """Train the monotone blender on validation-fold member predictions."""
    member_scores = np.asarray(member_scores, dtype=float)
    if np.isnan(member_scores).any():
        raise ValueError("missing member scores; refusing to impute")
    if member_scores.shape[-1] != len(member_names):
        raise ValueError("member manifest length mismatch")
    config = config or gbm.GbmConfig(n_rounds=300, max_depth=3, eta=0.05)
    X, y = _stack_member_scores(member_scores, np.asarray(labels))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(X))
    n_fit = int(0.8 * len(X))
    fit_idx, stop_idx = order[:n_fit], order[n_fit:]
    monotone = [1] * len(member_names) + [0]
    names = [f"score:{n}" for n in member_names] + ["task_id"]
    valid = (X[stop_idx], y[stop_idx]) if len(stop_idx) else None
    if valid is not None and len(np.unique(y[stop_idx])) < 2:
        valid = None
    booster = gbm.train_gbm(
        X[fit_idx], y[fit_idx], config, monotone=monotone, valid=valid,
        feature_names=names, task_feature=len(member_names),
    )
    return BlendModel(member_names, booster)


def predict_blend(model: BlendModel, member_scores: np.ndarray) -> np.ndarray:
    """Blend scores for (n_molecules, n_targets, n_members) member scores."""
    member_scores = np.asarray(member_scores, dtype=float)
    n_mol, n_targets, n_members = member_scores.shape
    if n_members != len(model.member_names):
        raise ValueError("member manifest length mismatch")
    tasks = np.tile(np.arange(n_targets, dtype=float), n_mol)
    X = np.column_stack([member_scores.reshape(-1, n_members), tasks])
    return model.booster.predict(X).reshape(n_mol, n_targets)


def correlation_matrix(
    member_scores: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Pearson correlations between member score vectors, computed per
    target over non-missing-label molecules and averaged across targets.

    Pairs with a constant score vector on a target are excluded from that
    target's contribution with a warning.
    """
    member_scores = np.asarray(member_scores, dtype=float)
    labels = np.asarray(labels)
    n_members = member_scores.shape[-1]
    total = np.zeros((n_members, n_members))
    counts = np.zeros((n_members, n_members))
    for t in range(labels.shape[1]):
        rows = labels[:, t] >= 0
        if rows.sum() < 2:
            continue
        block = member_scores[rows, t, :]
        std = block.std(axis=0)
        for i in range(n_members):
            for j in range(n_members):
                if std[i] == 0 or std[j] == 0:
                    log.warning(
                        "correlation undefined for members (%d, %d) on "
                        "target %d: constant scores", i, j, t)
                    continue
                r = np.corrcoef(block[:, i], block[:, j])[0, 1]
                total[i, j] += r
                counts[i, j] += 1
    with np.errstate(invalid="ignore"):
        out = total / counts
    return out
