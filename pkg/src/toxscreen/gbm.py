"""Gradient-boosted trees with logistic loss, exact greedy split search,
optional per-feature monotone constraints, and gain importance.

Multi-task training stacks one row per (molecule, target) pair with the task
identity appended as an ordinary integer-valued feature.  Split search is
exact greedy over sorted feature values; ties in gain are broken by lowest
feature index, then lowest threshold, then routing missing values left.
Missing feature values (NaN) are routed to the direction with higher gain.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

log = logging.getLogger(__name__)


@dataclass
class GbmConfig:
    n_rounds: int = 200
    max_depth: int = 6
    eta: float = 0.1
    reg_lambda: float = 1.0
    min_child_hessian: float = 1.0
    patience: int = 25
    stopping_metric: str = "loss"  # "loss" or "auc"
    # hyper-parameter search grid carried as data
    eta_grid: tuple[float, ...] = (1e-2, 5e-3, 1e-3, 5e-4)

    def __post_init__(self):
        if not (0 < self.eta <= 1):
            raise ValueError("eta must be in (0, 1]")
        if self.n_rounds < 0 or self.max_depth < 1 or self.reg_lambda < 0:
            raise ValueError("invalid GBM configuration")


@dataclass
class Tree:
    """Flattened binary tree; feature -1 marks a leaf."""
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    missing_left: list[bool] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    gain: list[float] = field(default_factory=list)

    def add_leaf(self, value: float) -> int:
        return self._add(-1, 0.0, True, -1, -1, value, 0.0)

    def add_split(self, feature: int, threshold: float, missing_left: bool,
                  gain: float) -> int:
        return self._add(feature, threshold, missing_left, -1, -1, 0.0, gain)

    def _add(self, feature, threshold, missing_left, left, right, value, gain):
        self.feature.append(feature)
        self.threshold.append(threshold)
        self.missing_left.append(missing_left)
        self.left.append(left)
        self.right.append(right)
        self.value.append(value)
        self.gain.append(gain)
        return len(self.feature) - 1

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X))
        stack = [(0, np.arange(len(X)))]
        while stack:
            node, rows = stack.pop()
            if len(rows) == 0:
                continue
            if self.feature[node] < 0:
                out[rows] = self.value[node]
                continue
            vals = X[rows, self.feature[node]]
            miss = np.isnan(vals)
            go_left = (vals < self.threshold[node]) | (miss & self.missing_left[node])
            stack.append((self.left[node], rows[go_left]))
            stack.append((self.right[node], rows[~go_left]))
        return out


@dataclass
class SplitCandidate:
    feature: int
    threshold: float
    missing_left: bool
    gain: float
    w_left: float
    w_right: float


def _leaf_weight(G: float, H: float, lam: float, lo: float, hi: float) -> float:
    return float(np.clip(-G / (H + lam), lo, hi))


def find_best_split(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    rows: np.ndarray,
    lam: float,
    min_child_hessian: float,
    monotone: np.ndarray,
    lo: float,
    hi: float,
) -> SplitCandidate | None:
    """Exact greedy search maximizing the regularized gain.

    Gain = 1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - (G_L+G_R)^2/(H_L+H_R+l)].
    Splits violating the monotone direction or min_child_hessian are skipped.
    """
    G = float(g[rows].sum())
    H = float(h[rows].sum())
    parent = G * G / (H + lam)
    best: SplitCandidate | None = None
    for f in range(X.shape[1]):
        vals = X[rows, f]
        miss = np.isnan(vals)
        present = rows[~miss]
        order = np.argsort(vals[~miss], kind="stable")
        sv = vals[~miss][order]
        sg = np.cumsum(g[present][order])
        sh = np.cumsum(h[present][order])
        G_miss = float(g[rows[miss]].sum())
        H_miss = float(h[rows[miss]].sum())
        if len(sv) < 2:
            continue
        cut = np.flatnonzero(sv[:-1] < sv[1:])
        if len(cut) == 0:
            continue
        thresholds = (sv[cut] + sv[cut + 1]) / 2.0
        GL0, HL0 = sg[cut], sh[cut]
        candidates = (
            (GL0 + G_miss, HL0 + H_miss, True),
            (GL0, HL0, False),
        )
        gains = []
        for GL, HL, _ in candidates:
            GR, HR = G - GL, H - HL
            gain = 0.5 * (GL * GL / (HL + lam) + GR * GR / (HR + lam) - parent)
            ok = (HL >= min_child_hessian) & (HR >= min_child_hessian)
            wl = np.clip(-GL / (HL + lam), lo, hi)
            wr = np.clip(-GR / (HR + lam), lo, hi)
            mono = monotone[f]
            if mono > 0:
                ok &= wl <= wr
            elif mono < 0:
                ok &= wl >= wr
            gains.append(np.where(ok, gain, -np.inf))
        gain_l, gain_r = gains
        use_right = gain_r > gain_l  # ties keep missing-left
        per_pos = np.where(use_right, gain_r, gain_l)
        pos = int(np.argmax(per_pos))  # first max -> lowest threshold
        if not np.isfinite(per_pos[pos]):
            continue
        if best is None or per_pos[pos] > best.gain:
            miss_left = not bool(use_right[pos])
            GL = float(GL0[pos] + (G_miss if miss_left else 0.0))
            HL = float(HL0[pos] + (H_miss if miss_left else 0.0))
            best = SplitCandidate(
                feature=f,
                threshold=float(thresholds[pos]),
                missing_left=miss_left,
                gain=float(per_pos[pos]),
                w_left=float(np.clip(-GL / (HL + lam), lo, hi)),
                w_right=float(np.clip(-(G - GL) / (H - HL + lam), lo, hi)),
            )
    if best is not None and best.gain <= 0.0:
        return None
    return best


def build_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    config: GbmConfig,
    monotone: np.ndarray,
) -> Tree:
    tree = Tree()

    def grow(rows: np.ndarray, depth: int, lo: float, hi: float) -> int:
        G = float(g[rows].sum())
        H = float(h[rows].sum())
        if depth >= config.max_depth or len(rows) < 2:
            return tree.add_leaf(_leaf_weight(G, H, config.reg_lambda, lo, hi))
        cand = find_best_split(
            X, g, h, rows, config.reg_lambda, config.min_child_hessian,
            monotone, lo, hi,
        )
        if cand is None:
            return tree.add_leaf(_leaf_weight(G, H, config.reg_lambda, lo, hi))
        node = tree.add_split(cand.feature, cand.threshold, cand.missing_left,
                              cand.gain)
        vals = X[rows, cand.feature]
        miss = np.isnan(vals)
        go_left = (vals < cand.threshold) | (miss & cand.missing_left)
        llo, lhi, rlo, rhi = lo, hi, lo, hi
        mono = monotone[cand.feature]
        if mono != 0:
            mid = (cand.w_left + cand.w_right) / 2.0
            if mono > 0:
                lhi, rlo = mid, mid
            else:
                llo, rhi = mid, mid
        tree.left[node] = grow(rows[go_left], depth + 1, llo, lhi)
        tree.right[node] = grow(rows[~go_left], depth + 1, rlo, rhi)
        return node

    grow(np.arange(len(X)), 0, -np.inf, np.inf)
    return tree


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=float)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _logloss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


@dataclass
class BoostedModel:
    base_score: float
    trees: list[Tree]
    eta: float
    feature_names: list[str]
    task_feature: int | None
    monotone: list[int]
    config: GbmConfig
    train_log: list[float] = field(default_factory=list)
    valid_log: list[float] = field(default_factory=list)
    best_round: int = 0

    def predict(self, X: np.ndarray) -> np.ndarray:
        return predict_gbm(self, X)


def train_gbm(
    X: np.ndarray,
    y: np.ndarray,
    config: GbmConfig | None = None,
    monotone: list[int] | None = None,
    valid: tuple[np.ndarray, np.ndarray] | None = None,
    feature_names: list[str] | None = None,
    task_feature: int | None = None,
) -> BoostedModel:
    """Boost regression trees on logistic-loss gradients.

    Stops at ``n_rounds`` or when the validation metric fails to improve for
    ``patience`` rounds, returning the prefix with the best validation score.
    """
    config = config or GbmConfig()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.isinf(X).any():
        raise ValueError("infinite feature values")
    if len(np.unique(y)) < 2:
        raise ValueError("training labels contain a single class")
    monotone_arr = np.array(monotone if monotone is not None
                            else [0] * X.shape[1], dtype=int)
    if len(monotone_arr) != X.shape[1]:
        raise ValueError("monotone spec length mismatch")
    prior = float(np.clip(y.mean(), 1e-7, 1 - 1e-7))
    base = math.log(prior / (1 - prior))
    raw = np.full(len(y), base)
    raw_valid = None
    if valid is not None:
        Xv = np.asarray(valid[0], dtype=float)
        yv = np.asarray(valid[1], dtype=float)
        raw_valid = np.full(len(yv), base)
    trees: list[Tree] = []
    train_log: list[float] = []
    valid_log: list[float] = []
    best_metric = np.inf
    best_round = -1
    for rnd in range(config.n_rounds):
        p = _sigmoid(raw)
        g = p - y
        h = np.maximum(p * (1 - p), 1e-16)
        tree = build_tree(X, g, h, config, monotone_arr)
        trees.append(tree)
        raw = raw + config.eta * tree.predict_raw(X)
        train_log.append(_logloss(y, _sigmoid(raw)))
        if raw_valid is not None:
            raw_valid = raw_valid + config.eta * tree.predict_raw(Xv)
            if config.stopping_metric == "auc":
                from .evaluate import roc_auc
                metric = -roc_auc(yv, _sigmoid(raw_valid))
            else:
                metric = _logloss(yv, _sigmoid(raw_valid))
            valid_log.append(metric)
            if metric < best_metric - 1e-12:
                best_metric = metric
                best_round = rnd
            elif rnd - best_round >= config.patience:
                break
    if raw_valid is not None and best_round >= 0:
        trees = trees[: best_round + 1]
    model = BoostedModel(
        base_score=base,
        trees=trees,
        eta=config.eta,
        feature_names=feature_names or [f"f{i}" for i in range(X.shape[1])],
        task_feature=task_feature,
        monotone=list(monotone_arr),
        config=config,
        train_log=train_log,
        valid_log=valid_log,
        best_round=len(trees) - 1,
    )
    return model


def predict_gbm(model: BoostedModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.shape[1] != len(model.feature_names):
        raise ValueError(
            f"schema mismatch: model expects {len(model.feature_names)} "
            f"features, got {X.shape[1]}"
        )
    raw = np.full(len(X), model.base_score)
    for tree in model.trees:
        raw += model.eta * tree.predict_raw(X)
    return _sigmoid(raw)


def gain_importance(model: BoostedModel) -> np.ndarray:
    """Total split gain per feature across all trees, normalized to sum 1."""
    gains = np.zeros(len(model.feature_names))
    for tree in model.trees:
        for node in range(len(tree.feature)):
            if tree.feature[node] >= 0:
                gains[tree.feature[node]] += tree.gain[node]
    total = gains.sum()
    return gains / total if total > 0 else gains


def stack_tasks(
    features: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One row per (molecule, target) pair with a non-missing label.

    Returns (stacked features with the task id appended as the last column,
    binary labels, (molecule, task) index pairs).
    """
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels)
    mols, tasks = np.nonzero(labels >= 0)
    X = np.column_stack([features[mols], tasks.astype(float)])
    y = labels[mols, tasks].astype(float)
    pairs = np.column_stack([mols, tasks])
    return X, y, pairs


# ---------------------------------------------------------------------------
# persistence


def save_gbm(model: BoostedModel, path) -> None:
    """Versioned structured text: config block, schema, flattened trees.

    Floats are written as hex for exact round-trip.
    """
    lines = ["gbm-model v1"]
    lines.append("config " + json.dumps(asdict(model.config)))
    lines.append("schema " + json.dumps({
        "base_score": model.base_score.hex(),
        "eta": model.eta.hex(),
        "feature_names": model.feature_names,
        "task_feature": None if model.task_feature is None
        else int(model.task_feature),
        "monotone": None if model.monotone is None
        else [int(m) for m in model.monotone],
        "best_round": int(model.best_round),
    }))
    for tree in model.trees:
        lines.append("tree")
        lines.append("feature " + ",".join(map(str, tree.feature)))
        lines.append("threshold " + ",".join(t.hex() for t in tree.threshold))
        lines.append("missing_left " +
                     ",".join("1" if m else "0" for m in tree.missing_left))
        lines.append("left " + ",".join(map(str, tree.left)))
        lines.append("right " + ",".join(map(str, tree.right)))
        lines.append("value " + ",".join(v.hex() for v in tree.value))
        lines.append("gain " + ",".join(v.hex() for v in tree.gain))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gbm(path) -> BoostedModel:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != "gbm-model v1":
        raise ValueError("not a gbm model file")
    config = GbmConfig(**{k: tuple(v) if isinstance(v, list) else v
                          for k, v in json.loads(lines[1].split(" ", 1)[1]).items()})
    schema = json.loads(lines[2].split(" ", 1)[1])
    trees: list[Tree] = []
    i = 3
    while i < len(lines):
        assert lines[i] == "tree"
        fields = {}
        for j in range(1, 8):
            name, _, data = lines[i + j].partition(" ")
            fields[name] = data.split(",") if data else []
        trees.append(Tree(
            feature=[int(v) for v in fields["feature"]],
            threshold=[float.fromhex(v) for v in fields["threshold"]],
            missing_left=[v == "1" for v in fields["missing_left"]],
            left=[int(v) for v in fields["left"]],
            right=[int(v) for v in fields["right"]],
            value=[float.fromhex(v) for v in fields["value"]],
            gain=[float.fromhex(v) for v in fields["gain"]],
        ))
        i += 8
    return BoostedModel(
        base_score=float.fromhex(schema["base_score"]),
        trees=trees,
        eta=float.fromhex(schema["eta"]),
        feature_names=schema["feature_names"],
        task_feature=schema["task_feature"],
        monotone=schema["monotone"],
        config=config,
        best_round=schema["best_round"],
    )
