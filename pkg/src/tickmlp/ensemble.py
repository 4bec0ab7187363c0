"""One-vs-one ensemble of three binary networks with a confidence gate.

Pairwise output order: ``m_ud`` -> (UP, DOWN), ``m_un`` -> (UP, NO_MOVE),
``m_dn`` -> (DOWN, NO_MOVE). A class's score is the mean of its probability
under the two networks that see it, renormalized so the three scores sum to 1.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from .features import NormState
from .labeler import Label
from .neural import MlpWeights, backward, forward, init_weights, sgd_step, softmax

ENSEMBLE_FILE_VERSION = 1


class Decision(IntEnum):
    UP = 0
    NO_MOVE = 1
    DOWN = 2
    NO_CONFIDENCE = 3

    @property
    def actionable(self) -> bool:
        return self is Decision.UP or self is Decision.DOWN


class ConfidenceScores(NamedTuple):
    up: float
    no_move: float
    down: float


# (model name, class in output slot 0, class in output slot 1)
PAIRS = (
    ("m_ud", Label.UP, Label.DOWN),
    ("m_un", Label.UP, Label.NO_MOVE),
    ("m_dn", Label.DOWN, Label.NO_MOVE),
)


@dataclass(frozen=True, eq=False)
class EnsembleWeights:
    m_ud: MlpWeights
    m_un: MlpWeights
    m_dn: MlpWeights
    norm: NormState
    version: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        dims = {(m.n_in, m.n_out) for m in self.models}
        if len(dims) != 1 or next(iter(dims))[1] != 2:
            raise ValueError(f"pairwise models must share input dim and have 2 outputs, got {dims}")
        if self.norm.dim != self.m_ud.n_in:
            raise ValueError("normalization state dimension differs from model input")

    @property
    def models(self) -> tuple[MlpWeights, MlpWeights, MlpWeights]:
        return (self.m_ud, self.m_un, self.m_dn)

    @property
    def n_in(self) -> int:
        return self.m_ud.n_in

    @cached_property
    def _packed(self):
        # Stack the three nets into one block-diagonal net for the per-tick path.
        if len({m.dims for m in self.models}) != 1:
            return None
        ws, bs = [], []
        for layer in range(len(self.m_ud.weights)):
            mats = [m.weights[layer] for m in self.models]
            if layer == 0:
                ws.append(np.vstack(mats))
            else:
                r, c = mats[0].shape
                blk = np.zeros((3 * r, 3 * c))
                for k, mat in enumerate(mats):
                    blk[k * r:(k + 1) * r, k * c:(k + 1) * c] = mat
                ws.append(blk)
            bs.append(np.concatenate([m.biases[layer] for m in self.models]))
        return [(w.T.copy(), b) for w, b in zip(ws, bs)]

    def equals(self, other: EnsembleWeights) -> bool:
        return self.version == other.version and all(a.equals(b) for a, b in zip(self.models, other.models))

    def to_dict(self) -> dict:
        return {
            "format": ENSEMBLE_FILE_VERSION,
            "version": self.version,
            "meta": self.meta,
            "norm": self.norm.to_dict(),
            **{name: m.to_dict() for (name, _, _), m in zip(PAIRS, self.models)},
        }

    @classmethod
    def from_dict(cls, d: dict) -> EnsembleWeights:
        if d.get("format") != ENSEMBLE_FILE_VERSION:
            raise ValueError(f"unsupported ensemble format {d.get('format')!r}")
        return cls(
            m_ud=MlpWeights.from_dict(d["m_ud"]),
            m_un=MlpWeights.from_dict(d["m_un"]),
            m_dn=MlpWeights.from_dict(d["m_dn"]),
            norm=NormState.from_dict(d["norm"]),
            version=int(d["version"]),
            meta=dict(d.get("meta", {})),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def load(cls, path) -> EnsembleWeights:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def init_ensemble(n_in: int, hidden: Sequence[int], seed: int, norm: NormState | None = None) -> EnsembleWeights:
    dims = [n_in, *hidden, 2]
    models = [init_weights(dims, seed * 3 + k) for k in range(3)]
    return EnsembleWeights(*models, norm=norm if norm is not None else NormState(n_in))


def combine(p_ud: np.ndarray, p_un: np.ndarray, p_dn: np.ndarray) -> np.ndarray:
    """Pairwise probabilities -> normalized (up, no_move, down) columns."""
    raw = np.stack(
        [
            (p_ud[..., 0] + p_un[..., 0]) / 2,
            (p_un[..., 1] + p_dn[..., 1]) / 2,
            (p_ud[..., 1] + p_dn[..., 0]) / 2,
        ],
        axis=-1,
    )
    return raw / raw.sum(axis=-1, keepdims=True)


def _pair(l0: float, l1: float) -> tuple[float, float]:
    # two-class softmax, same operation order as the max-shifted form
    d = l1 - l0
    if d <= 0.0:
        ex = math.exp(d)
        return 1.0 / (1.0 + ex), ex / (1.0 + ex)
    ex = math.exp(-d)
    return ex / (ex + 1.0), 1.0 / (ex + 1.0)


def predict(e: EnsembleWeights, x: np.ndarray) -> ConfidenceScores:
    packed = e._packed
    if packed is None or np.ndim(x) != 1:
        s = combine(*(forward(m, x) for m in e.models))
        return ConfidenceScores(*map(float, s))
    if x.shape[0] != e.n_in:
        forward(e.m_ud, x)  # raises DimMismatch
    a = x
    for W, b in packed[:-1]:
        a = a @ W + b
        np.maximum(a, 0.0, out=a)
    W, b = packed[-1]
    l = (a @ W + b).tolist()
    ud_u, ud_d = _pair(l[0], l[1])
    un_u, un_n = _pair(l[2], l[3])
    dn_d, dn_n = _pair(l[4], l[5])
    up = (ud_u + un_u) / 2
    no_move = (un_n + dn_n) / 2
    down = (ud_d + dn_d) / 2
    total = up + no_move + down
    return ConfidenceScores(up / total, no_move / total, down / total)


def predict_batch(e: EnsembleWeights, X: np.ndarray) -> np.ndarray:
    """Scores for many rows at once, shape ``(n, 3)``."""
    return combine(*(forward(m, X) for m in e.models))


def decide(s: Sequence[float], threshold: float) -> tuple[Decision, float]:
    """Argmax with ties broken UP > NO_MOVE > DOWN, then the confidence gate."""
    up, no_move, down = s
    if up >= no_move and up >= down:
        win, score = Decision.UP, up
    elif no_move >= down:
        win, score = Decision.NO_MOVE, no_move
    else:
        win, score = Decision.DOWN, down
    if score < threshold:
        return Decision.NO_CONFIDENCE, score
    return win, score


def route(labels: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """For each pairwise model, the row indices it trains on and their 0/1 targets."""
    labels = np.asarray(labels)
    out = []
    for _, first, second in PAIRS:
        idx = np.flatnonzero((labels == first) | (labels == second))
        out.append((idx, (labels[idx] == second).astype(np.int64)))
    return out


def train_ovo(
    e: EnsembleWeights,
    X: np.ndarray,
    labels: np.ndarray,
    lr: float,
    norm: NormState | None = None,
) -> EnsembleWeights:
    """One mean-gradient SGD step per pairwise model on its routed rows."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) == 0:
        raise ValueError("empty training batch")
    models = list(e.models)
    for k, (idx, y) in enumerate(route(labels)):
        if len(idx):
            models[k] = sgd_step(models[k], backward(models[k], X[idx], y), lr)
    return EnsembleWeights(
        *models,
        norm=e.norm if norm is None else norm,
        version=e.version + 1,
        meta=e.meta,
    )
