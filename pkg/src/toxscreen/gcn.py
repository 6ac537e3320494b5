"""Graph-convolutional classifier operating directly on molecular graphs.

Message passing sums neighbor states, applies a per-round affine map and
ReLU; a softmax readout over rounds and atoms accumulates a learned
fingerprint which a dense sigmoid head maps to per-target probabilities.
Sum aggregation makes outputs exactly invariant to atom relabeling.
Training shares the masked-loss / Adam / early-stopping contract of the
feedforward module.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass

import numpy as np

from .chem import MolecularGraph
from .mlp import MlpConfig, masked_bce

log = logging.getLogger(__name__)

ELEMENT_PALETTE = ("C", "N", "O", "S", "P", "F", "Cl", "Br", "I")
MAX_DEGREE = 5
MAX_H = 4
ATOM_FEATURE_WIDTH = len(ELEMENT_PALETTE) + 1 + (MAX_DEGREE + 1) + 1 + (MAX_H + 1)


@dataclass
class GcnConfig(MlpConfig):
    rounds: int = 2
    hidden: int = 64
    fingerprint: int = 128

    def __post_init__(self):
        super().__post_init__()
        self.batch_size = min(self.batch_size, 64)


@dataclass
class GcnParams:
    W: list[np.ndarray]       # per-round propagation weights
    c: list[np.ndarray]       # per-round biases
    W_out: np.ndarray         # hidden -> fingerprint readout
    W_head: np.ndarray        # fingerprint -> targets
    b_head: np.ndarray

    def copy(self) -> "GcnParams":
        return GcnParams([w.copy() for w in self.W], [b.copy() for b in self.c],
                         self.W_out.copy(), self.W_head.copy(),
                         self.b_head.copy())

    def arrays(self) -> list[np.ndarray]:
        return [*self.W, *self.c, self.W_out, self.W_head, self.b_head]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def unflatten(self, vec: np.ndarray) -> "GcnParams":
        out = self.copy()
        i = 0
        for a in out.arrays():
            a[...] = vec[i : i + a.size].reshape(a.shape)
            i += a.size
        return out


def atom_features(g: MolecularGraph) -> np.ndarray:
    """Fixed-width one-hot encoding: element (+other), degree, aromatic, H."""
    if not g.atoms:
        raise ValueError("empty graph")
    out = np.zeros((len(g.atoms), ATOM_FEATURE_WIDTH))
    for i, atom in enumerate(g.atoms):
        try:
            el = ELEMENT_PALETTE.index(atom.element)
        except ValueError:
            el = len(ELEMENT_PALETTE)
        out[i, el] = 1.0
        deg = min(g.degree(i), MAX_DEGREE)
        out[i, len(ELEMENT_PALETTE) + 1 + deg] = 1.0
        if atom.aromatic:
            out[i, len(ELEMENT_PALETTE) + 1 + MAX_DEGREE + 1] = 1.0
        h = min(atom.implicit_h, MAX_H)
        out[i, len(ELEMENT_PALETTE) + 1 + MAX_DEGREE + 2 + h] = 1.0
    return out


def init_gcn(config: GcnConfig, n_targets: int,
             rng: np.random.Generator) -> GcnParams:
    def he(fan_in, shape):
        return rng.uniform(-np.sqrt(6.0 / fan_in), np.sqrt(6.0 / fan_in), shape)

    W = []
    c = []
    width_in = ATOM_FEATURE_WIDTH
    for _ in range(config.rounds):
        W.append(he(width_in, (width_in, config.hidden)))
        c.append(np.zeros(config.hidden))
        width_in = config.hidden
    return GcnParams(
        W, c,
        he(config.hidden, (config.hidden, config.fingerprint)),
        he(config.fingerprint, (config.fingerprint, n_targets)),
        np.zeros(n_targets),
    )


def _adjacency(g: MolecularGraph) -> np.ndarray:
    A = np.zeros((len(g.atoms), len(g.atoms)))
    for b in g.bonds:
        A[b.a, b.b] = 1.0
        A[b.b, b.a] = 1.0
    return A


def _softmax(U: np.ndarray) -> np.ndarray:
    e = np.exp(U - U.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def gcn_forward(params: GcnParams, g: MolecularGraph,
                cache: dict | None = None) -> np.ndarray:
    """Per-target probabilities for one molecule."""
    X = atom_features(g)
    A = _adjacency(g)
    h = X
    hs = [h]
    pre = []
    for W, c in zip(params.W, params.c):
        S = h + A @ h
        Z = S @ W + c
        h = np.maximum(Z, 0.0)
        hs.append(h)
        pre.append((S, Z))
    fingerprint = np.zeros(params.W_out.shape[1])
    softmaxes = []
    for hr in hs[1:]:
        P = _softmax(hr @ params.W_out)
        softmaxes.append(P)
        fingerprint += P.sum(axis=0)
    z = fingerprint @ params.W_head + params.b_head
    probs = 1.0 / (1.0 + np.exp(-np.clip(z, -60, 60)))
    if cache is not None:
        cache.update(A=A, hs=hs, pre=pre, softmaxes=softmaxes,
                     fingerprint=fingerprint, probs=probs)
    return probs


def _backward_graph(params: GcnParams, cache: dict, dz: np.ndarray,
                    grads: GcnParams) -> None:
    A = cache["A"]
    hs = cache["hs"]
    grads.W_head += np.outer(cache["fingerprint"], dz)
    grads.b_head += dz
    df = params.W_head @ dz
    dh = [np.zeros_like(h) for h in hs]
    for r, P in enumerate(cache["softmaxes"], start=1):
        dU = P * (df - (P @ df)[:, None])
        grads.W_out += hs[r].T @ dU
        dh[r] += dU @ params.W_out.T
    for r in range(len(params.W) - 1, -1, -1):
        S, Z = cache["pre"][r]
        dZ = dh[r + 1] * (Z > 0)
        grads.W[r] += S.T @ dZ
        grads.c[r] += dZ.sum(axis=0)
        dS = dZ @ params.W[r].T
        dh[r] += dS + A @ dS
    cache["dh0"] = dh[0]


def gcn_batch(params: GcnParams, graphs: list[MolecularGraph]) -> np.ndarray:
    return np.vstack([gcn_forward(params, g) for g in graphs])


def gcn_loss_and_gradients(
    params: GcnParams, graphs: list[MolecularGraph], y: np.ndarray
) -> tuple[float, GcnParams]:
    caches = []
    outputs = []
    for g in graphs:
        cache: dict = {}
        outputs.append(gcn_forward(params, g, cache))
        caches.append(cache)
    probs = np.vstack(outputs)
    loss, dprobs = masked_bce(y, probs)
    grads = GcnParams(
        [np.zeros_like(w) for w in params.W],
        [np.zeros_like(b) for b in params.c],
        np.zeros_like(params.W_out),
        np.zeros_like(params.W_head),
        np.zeros_like(params.b_head),
    )
    for i, cache in enumerate(caches):
        p = cache["probs"]
        dz = dprobs[i] * p * (1.0 - p)
        _backward_graph(params, cache, dz, grads)
    return loss, grads


def train_gcn(
    train: tuple[list[MolecularGraph], np.ndarray],
    valid: tuple[list[MolecularGraph], np.ndarray] | None,
    config: GcnConfig | None = None,
) -> GcnParams:
    config = config or GcnConfig()
    graphs, y = train
    y = np.asarray(y)
    rng = np.random.default_rng(config.seed)
    params = init_gcn(config, y.shape[1], rng)
    m = [np.zeros_like(a) for a in params.arrays()]
    v = [np.zeros_like(a) for a in params.arrays()]
    step = 0
    best_loss = np.inf
    best_params = params.copy()
    best_epoch = -1
    for epoch in range(config.max_epochs):
        order = rng.permutation(len(graphs))
        for start in range(0, len(graphs), config.batch_size):
            batch = order[start : start + config.batch_size]
            yb = y[batch]
            if (yb >= 0).sum() == 0:
                continue
            _, grads = gcn_loss_and_gradients(
                params, [graphs[i] for i in batch], yb)
            step += 1
            for i, (a, ga) in enumerate(zip(params.arrays(), grads.arrays())):
                m[i] = config.beta1 * m[i] + (1 - config.beta1) * ga
                v[i] = config.beta2 * v[i] + (1 - config.beta2) * ga * ga
                mhat = m[i] / (1 - config.beta1 ** step)
                vhat = v[i] / (1 - config.beta2 ** step)
                a -= config.learning_rate * mhat / (np.sqrt(vhat) + config.adam_eps)
        eval_set = valid if valid is not None else train
        vloss, _ = masked_bce(eval_set[1], gcn_batch(params, eval_set[0]))
        if vloss < best_loss - 1e-12:
            best_loss = vloss
            best_params = params.copy()
            best_epoch = epoch
        elif epoch - best_epoch >= config.patience:
            break
    return best_params


# ---------------------------------------------------------------------------
# persistence (same versioned-block format family as the mlp module)


def save_gcn(params: GcnParams, path) -> None:
    arrays = params.arrays()
    lines = ["gcn-params v1"]
    lines.append("shapes " + json.dumps([list(a.shape) for a in arrays]))
    lines.append("rounds " + str(len(params.W)))
    for a in arrays:
        lines.append("A " + ",".join(x.hex() for x in a.ravel()))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gcn(path) -> GcnParams:
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if lines[0] != "gcn-params v1":
        raise ValueError("not a gcn parameter file")
    shapes = json.loads(lines[1].split(" ", 1)[1])
    rounds = int(lines[2].split(" ", 1)[1])
    arrays = []
    for i, shape in enumerate(shapes):
        data = lines[3 + i].split(" ", 1)[1].split(",")
        arr = np.array([float.fromhex(x) for x in data])
        arrays.append(arr.reshape(shape) if shape else arr[0])
    W = arrays[:rounds]
    c = arrays[rounds : 2 * rounds]
    W_out, W_head, b_head = arrays[2 * rounds :]
    return GcnParams(W, c, W_out, W_head, b_head)
