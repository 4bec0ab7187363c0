"""Small dense ReLU/softmax networks trained with plain SGD, in numpy."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

WEIGHTS_FILE_VERSION = 1
PROB_FLOOR = 1e-12


class BadDims(ValueError):
    pass


class DimMismatch(ValueError):
    pass


class BadTarget(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, order="C")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MlpWeights:
    """Per-layer ``(W, b)`` with ``W`` shaped ``(out, in)``; arrays are read-only."""

    dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if len(self.dims) < 2 or min(self.dims) <= 0:
            raise BadDims(f"bad dims {self.dims}")
        if len(self.weights) != len(self.dims) - 1 or len(self.biases) != len(self.weights):
            raise BadDims("layer count does not match dims")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.dims[i + 1], self.dims[i]) or b.shape != (self.dims[i + 1],):
                raise BadDims(f"layer {i} shapes {w.shape}/{b.shape} do not match dims {self.dims}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite entries")

    @classmethod
    def from_arrays(cls, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> MlpWeights:
        ws = tuple(_frozen(w) for w in weights)
        bs = tuple(_frozen(b) for b in biases)
        dims = (ws[0].shape[1],) + tuple(w.shape[0] for w in ws) if ws else ()
        return cls(dims, ws, bs)

    @property
    def n_in(self) -> int:
        return self.dims[0]

    @property
    def n_out(self) -> int:
        return self.dims[-1]

    def equals(self, other: MlpWeights) -> bool:
        return self.dims == other.dims and all(
            np.array_equal(a, b) for a, b in zip(self.weights + self.biases, other.weights + other.biases)
        )

    def to_dict(self) -> dict:
        return {
            "version": WEIGHTS_FILE_VERSION,
            "dims": list(self.dims),
            "layers": [{"w": w.tolist(), "b": b.tolist()} for w, b in zip(self.weights, self.biases)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> MlpWeights:
        if d.get("version") != WEIGHTS_FILE_VERSION:
            raise ValueError(f"unsupported weights version {d.get('version')!r}")
        layers = d["layers"]
        try:
            out = cls.from_arrays(
                [np.array(l["w"], dtype=np.float64) for l in layers],
                [np.array(l["b"], dtype=np.float64) for l in layers],
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise BadDims(f"malformed layer list: {exc}") from exc
        if list(out.dims) != list(d["dims"]):
            raise BadDims(f"declared dims {d['dims']} disagree with layer shapes {list(out.dims)}")
        return out

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)

    @classmethod
    def load(cls, path) -> MlpWeights:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


Grads = tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]


def init_weights(dims: Sequence[int], seed: int) -> MlpWeights:
    """He-uniform weights (bound sqrt(6/fan_in)), zero biases."""
    dims = tuple(int(d) for d in dims)
    if len(dims) < 2 or min(dims) <= 0:
        raise BadDims(f"need at least input and output sizes, all positive; got {dims}")
    rng = np.random.Generator(np.random.PCG64(seed))
    ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MlpWeights.from_arrays(ws, bs)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def forward(w: MlpWeights, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one input vector or a batch of rows."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != w.n_in:
        raise DimMismatch(f"input has {x.shape[-1]} features, network expects {w.n_in}")
    a = x
    last = len(w.weights) - 1
    for i, (W, b) in enumerate(zip(w.weights, w.biases)):
        a = a @ W.T + b
        if i < last:
            a = np.maximum(a, 0.0)
    return softmax(a)


def loss(probs: np.ndarray, target: int) -> float:
    if not 0 <= target < len(probs):
        raise BadTarget(f"target {target} outside 0..{len(probs) - 1}")
    return -math.log(max(float(probs[target]), PROB_FLOOR))


def mean_loss(w: MlpWeights, X: np.ndarray, y: np.ndarray) -> float:
    p = forward(w, X)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], PROB_FLOOR))))


def backward(w: MlpWeights, X: np.ndarray, y: np.ndarray) -> Grads:
    """Batch-mean cross-entropy gradients, shaped like ``w``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.int64).reshape(-1)
    if X.shape[1] != w.n_in:
        raise DimMismatch(f"input has {X.shape[1]} features, network expects {w.n_in}")
    if len(y) != len(X) or len(y) == 0:
        raise ValueError("batch must be non-empty with one target per row")
    if y.min() < 0 or y.max() >= w.n_out:
        raise BadTarget(f"targets must lie in 0..{w.n_out - 1}")

    acts = [X]
    a = X
    last = len(w.weights) - 1
    for i, (W, b) in enumerate(zip(w.weights, w.biases)):
        a = a @ W.T + b
        if i < last:
            a = np.maximum(a, 0.0)
            acts.append(a)
    delta = softmax(a)
    delta[np.arange(len(y)), y] -= 1.0
    delta /= len(y)

    gw: list[np.ndarray] = [None] * len(w.weights)  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * len(w.weights)  # type: ignore[list-item]
    for i in range(last, -1, -1):
        gw[i] = delta.T @ acts[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            # ReLU gate: acts[i] > 0 exactly where the pre-activation was positive
            delta = (delta @ w.weights[i]) * (acts[i] > 0)
    return tuple(gw), tuple(gb)


def sgd_step(w: MlpWeights, g: Grads, lr: float) -> MlpWeights:
    if lr <= 0:
        raise ValueError("learning rate must be positive")
    gw, gb = g
    return MlpWeights.from_arrays(
        [W - lr * dW for W, dW in zip(w.weights, gw)],
        [b - lr * db for b, db in zip(w.biases, gb)],
    )


def train_epochs(
    w: MlpWeights,
    X: np.ndarray,
    y: np.ndarray,
    lr: float,
    epochs: int,
    batch_size: int,
    seed: int,
) -> MlpWeights:
    """Mini-batch SGD with a fresh seeded shuffle every epoch."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if len(X) == 0:
        raise ValueError("no training samples")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(X)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            w = sgd_step(w, backward(w, X[idx], y[idx]), lr)
    return w
