"""Multi-task feedforward classifier with a masked cross-entropy loss.

The label matrix is three-valued (1 active, 0 inactive, -1 missing); the
loss averages binary cross-entropy over the non-missing entries only, so
missing labels contribute nothing to the value or any parameter gradient.
Training uses Adam with He-uniform initialization, inverted dropout, and
best-checkpoint early stopping on validation loss.
"""

from __future__ import annotations

import copy
import json
import logging
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

EPS = 1e-7


class EmptyMaskError(ValueError):
    pass


@dataclass
class MlpConfig:
    layers: int = 2
    width: int = 256
    dropout: float = 0.5
    batch_size: int = 512
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    max_epochs: int = 500
    patience: int = 25
    seed: int = 0
    # search grids carried as data ("516" kept verbatim from the source grid)
    layer_grid: tuple[int, ...] = (2, 3)
    width_grid: tuple[int, ...] = (256, 516, 1024)

    def __post_init__(self):
        if not (0 <= self.dropout < 1):
            raise ValueError("dropout must be in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class NetworkParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights],
                             [b.copy() for b in self.biases])

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.weights + self.biases])

    def unflatten(self, vec: np.ndarray) -> "NetworkParams":
        out = self.copy()
        i = 0
        for arrs in (out.weights, out.biases):
            for a in arrs:
                a[...] = vec[i : i + a.size].reshape(a.shape)
                i += a.size
        return out


def init_params(sizes: list[int], rng: np.random.Generator) -> NetworkParams:
    """He-uniform initialization; sizes = [in, hidden..., out]."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NetworkParams(weights, biases)


def masked_bce(y: np.ndarray, yhat: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean over non-missing entries of -[y log p + (1-y) log(1-p)].

    Returns the scalar loss and its gradient w.r.t. yhat (zero at masked
    positions).  Predictions are clamped to [EPS, 1-EPS].
    """
    y = np.asarray(y)
    mask = y >= 0
    n = int(mask.sum())
    if n == 0:
        raise EmptyMaskError("empty mask: all labels missing")
    p = np.clip(yhat, EPS, 1 - EPS)
    yf = np.where(mask, y, 0).astype(float)
    terms = -(yf * np.log(p) + (1 - yf) * np.log(1 - p))
    loss = float(terms[mask].sum() / n)
    grad = np.where(mask, (p - yf) / (p * (1 - p)), 0.0) / n
    grad[yhat != p] = 0.0  # clamped entries are flat
    return loss, grad


def make_dropout_masks(
    params: NetworkParams, n: int, rate: float, rng: np.random.Generator
) -> list[np.ndarray]:
    """Inverted-dropout masks for each hidden layer of a batch of size n."""
    masks = []
    for w in params.weights[:-1]:
        keep = 1.0 - rate
        masks.append((rng.random((n, w.shape[1])) < keep) / keep)
    return masks


def forward(
    params: NetworkParams,
    X: np.ndarray,
    dropout_masks: list[np.ndarray] | None = None,
) -> np.ndarray:
    """Affine -> ReLU -> dropout per hidden layer; sigmoid outputs (N x T)."""
    probs, _ = _forward_cache(params, X, dropout_masks)
    return probs


def _forward_cache(params, X, dropout_masks):
    activations = [np.asarray(X, dtype=float)]
    pre = []
    a = activations[0]
    n_hidden = len(params.weights) - 1
    for i in range(n_hidden):
        z = a @ params.weights[i] + params.biases[i]
        pre.append(z)
        a = np.maximum(z, 0.0)
        if dropout_masks is not None:
            a = a * dropout_masks[i]
        activations.append(a)
    z_out = a @ params.weights[-1] + params.biases[-1]
    pre.append(z_out)
    probs = 1.0 / (1.0 + np.exp(-np.clip(z_out, -60, 60)))
    return probs, (activations, pre)


def loss_and_gradients(
    params: NetworkParams,
    X: np.ndarray,
    y: np.ndarray,
    dropout_masks: list[np.ndarray] | None = None,
) -> tuple[float, NetworkParams]:
    """Masked BCE through the network; returns loss and parameter gradients."""
    probs, (activations, pre) = _forward_cache(params, X, dropout_masks)
    loss, dprobs = masked_bce(y, probs)
    grads = NetworkParams(
        [np.zeros_like(w) for w in params.weights],
        [np.zeros_like(b) for b in params.biases],
    )
    dz = dprobs * probs * (1.0 - probs)
    n_hidden = len(params.weights) - 1
    for i in range(n_hidden, -1, -1):
        grads.weights[i][...] = activations[i].T @ dz
        grads.biases[i][...] = dz.sum(axis=0)
        if i > 0:
            da = dz @ params.weights[i].T
            if dropout_masks is not None:
                da = da * dropout_masks[i - 1]
            dz = da * (pre[i - 1] > 0)
    return loss, grads


def train_mlp(
    train: tuple[np.ndarray, np.ndarray],
    valid: tuple[np.ndarray, np.ndarray] | None,
    config: MlpConfig | None = None,
) -> NetworkParams:
    """Mini-batch Adam on the masked loss with 25-epoch-patience early
    stopping; returns the best-validation-loss parameters."""
    config = config or MlpConfig()
    X, y = np.asarray(train[0], dtype=float), np.asarray(train[1])
    rng = np.random.default_rng(config.seed)
    sizes = [X.shape[1]] + [config.width] * config.layers + [y.shape[1]]
    params = init_params(sizes, rng)
    m = [np.zeros_like(a) for a in params.weights + params.biases]
    v = [np.zeros_like(a) for a in params.weights + params.biases]
    step = 0
    best_loss = np.inf
    best_params = params.copy()
    best_epoch = -1
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), config.batch_size):
            batch = order[start : start + config.batch_size]
            if (y[batch] >= 0).sum() == 0:
                continue
            masks = (make_dropout_masks(params, len(batch), config.dropout, rng)
                     if config.dropout > 0 else None)
            _, grads = loss_and_gradients(params, X[batch], y[batch], masks)
            step += 1
            arrays = params.weights + params.biases
            gradient_arrays = grads.weights + grads.biases
            for i, (a, ga) in enumerate(zip(arrays, gradient_arrays)):
                m[i] = config.beta1 * m[i] + (1 - config.beta1) * ga
                v[i] = config.beta2 * v[i] + (1 - config.beta2) * ga * ga
                mhat = m[i] / (1 - config.beta1 ** step)
                vhat = v[i] / (1 - config.beta2 ** step)
                a -= config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
        if valid is not None:
            vloss, _ = masked_bce(valid[1], forward(params, valid[0]))
        else:
            vloss, _ = masked_bce(y, forward(params, X))
        if vloss < best_loss - 1e-12:
            best_loss = vloss
            best_params = params.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    return best_params


# ---------------------------------------------------------------------------
# persistence (versioned blocks with layer shapes and row-major weights)


def save_params(params: NetworkParams, path) -> None:
    lines = ["mlp-params v1"]
    lines.append("shapes " + json.dumps(
        [list(w.shape) for w in params.weights]))
    for w, b in zip(params.weights, params.biases):
        lines.append("W " + ",".join(x.hex() for x in w.ravel()))
        lines.append("b " + ",".join(x.hex() for x in b))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_params(path) -> NetworkParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != "mlp-params v1":
        raise ValueError("not an mlp parameter file")
    shapes = json.loads(lines[1].split(" ", 1)[1])
    weights, biases = [], []
    for i, shape in enumerate(shapes):
        wdata = lines[2 + 2 * i].split(" ", 1)[1].split(",")
        bdata = lines[3 + 2 * i].split(" ", 1)[1].split(",")
        weights.append(np.array([float.fromhex(x) for x in wdata]).reshape(shape))
        biases.append(np.array([float.fromhex(x) for x in bdata]))
    return NetworkParams(weights, biases)
