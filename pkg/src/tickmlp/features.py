"""Trailing-window features over the last ``W`` ticks.

Feature layout (version 1), D = 4 + 2 * len(lags):

    0  relative spread          spread / mid
    1  imb1                      top-level order imbalance
    2  imb5                      five-level order imbalance
    3  microprice offset         (microprice - mid) / mid
    then for each lag l in ``lag_set(W)`` (ascending):
       ret_l                     ln(mid_t / mid_{t-l})
    then for each lag l:
       dimb1_l                   imb1_t - imb1_{t-l}
"""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .market_data import BookSnapshot, Tick

FEATURE_VERSION = 1
BASE_LAGS = (1, 2, 5, 10, 20, 50, 100, 200)
MAX_BASE_LAG = max(BASE_LAGS)
CLIP = 5.0
DEFAULT_ALPHA = 0.001


class ColdWindow(RuntimeError):
    pass


def lag_set(window: int) -> tuple[int, ...]:
    return tuple(sorted({*BASE_LAGS, window - 1} & set(range(1, window))))


def feature_dim(window: int) -> int:
    return 4 + 2 * len(lag_set(window))


def feature_names(window: int) -> list[str]:
    lags = lag_set(window)
    return (
        ["rel_spread", "imb1", "imb5", "micro_off"]
        + [f"ret_{l}" for l in lags]
        + [f"dimb1_{l}" for l in lags]
    )


def order_imbalance(book: BookSnapshot, levels: int) -> float:
    if not 1 <= levels <= len(book.bid_qty):
        raise ValueError("levels must be in 1..5")
    b = sum(book.bid_qty[:levels])
    a = sum(book.ask_qty[:levels])
    return (b - a) / (b + a)


def microprice(book: BookSnapshot) -> Fraction:
    bq, aq = book.bid_qty[0], book.ask_qty[0]
    return Fraction(book.bid_px[0] * aq + book.ask_px[0] * bq, bq + aq)


def current_block(book: BookSnapshot) -> tuple[int, int, float, float, float]:
    """(2*mid, spread, imb1, imb5, micro_off) derived from one snapshot.

    Mid is carried doubled so it stays an exact integer.
    """
    bid, ask = book.bid_px[0], book.ask_px[0]
    bq, aq = book.bid_qty[0], book.ask_qty[0]
    mid2 = bid + ask
    # (micro - mid)/mid == (ask - bid)(bq - aq) / ((bq + aq)(bid + ask))
    micro_off = (ask - bid) * (bq - aq) / ((bq + aq) * mid2)
    return mid2, ask - bid, (bq - aq) / (bq + aq), order_imbalance(book, 5), micro_off


class TickWindow:
    """Fixed-capacity ring buffer of per-tick derived quantities."""

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ValueError("window capacity must be at least 2")
        self.capacity = capacity
        self.count = 0
        self._head = -1  # slot of newest entry
        self._mid2 = np.zeros(capacity)
        self._imb1 = np.zeros(capacity)
        self._cur = np.zeros(4)
        self.lags = np.array(lag_set(capacity), dtype=np.int64)

    def push(self, tick: Tick) -> None:
        mid2, spr, imb1, imb5, moff = current_block(tick.book)
        h = self._head + 1
        if h == self.capacity:
            h = 0
        self._head = h
        self._mid2[h] = mid2
        self._imb1[h] = imb1
        self._cur[0] = 2.0 * spr / mid2
        self._cur[1] = imb1
        self._cur[2] = imb5
        self._cur[3] = moff
        if self.count < self.capacity:
            self.count += 1

    @property
    def warm(self) -> bool:
        return self.count == self.capacity

    def mids(self) -> list[Fraction]:
        """Mid prices oldest to newest."""
        order = [(self._head - i) % self.capacity for i in range(self.count - 1, -1, -1)]
        return [Fraction(int(self._mid2[j]), 2) for j in order]

    def raw(self) -> np.ndarray:
        if self.count < self.capacity:
            raise ColdWindow(f"window holds {self.count} of {self.capacity} ticks")
        h = self._head
        idx = (h - self.lags) % self.capacity
        prev = self._mid2[idx]
        rets = np.log1p((self._mid2[h] - prev) / prev)
        dimb = self._imb1[h] - self._imb1[idx]
        return np.concatenate((self._cur, rets, dimb))


class NormState:
    """Exponentially weighted per-dimension mean/variance.

    For the first ``1/alpha`` updates the weight is ``1/count`` (a plain
    running average) so early z-scores are not dominated by the first tick.
    """

    def __init__(self, dim: int, alpha: float = DEFAULT_ALPHA):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        self.alpha = alpha
        self.count = 0
        self.mean = np.zeros(dim)
        self.var = np.zeros(dim)

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def copy(self) -> NormState:
        out = NormState(self.dim, self.alpha)
        out.count = self.count
        out.mean = self.mean.copy()
        out.var = self.var.copy()
        return out

    def update(self, raw: np.ndarray) -> None:
        self.count += 1
        a = max(self.alpha, 1.0 / self.count)
        delta = raw - self.mean
        self.mean += a * delta
        delta *= delta
        delta *= a
        delta += self.var
        delta *= 1.0 - a
        self.var = delta

    def normalize(self, raw: np.ndarray) -> np.ndarray:
        std = np.sqrt(self.var)
        z = np.subtract(raw, self.mean)
        np.divide(z, std, out=z, where=std > 1e-12)
        z[std <= 1e-12] = 0.0
        np.minimum(z, CLIP, out=z)
        np.maximum(z, -CLIP, out=z)
        return z

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "count": self.count, "mean": self.mean.tolist(), "var": self.var.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> NormState:
        out = cls(len(d["mean"]), d["alpha"])
        out.count = int(d["count"])
        out.mean = np.asarray(d["mean"], dtype=float)
        out.var = np.asarray(d["var"], dtype=float)
        if out.var.shape != out.mean.shape or np.any(out.var < 0) or not np.all(np.isfinite(out.mean)):
            raise ValueError("invalid normalization state")
        return out


def extract(window: TickWindow, norm: NormState) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(raw, normalized)`` and fold ``raw`` into ``norm``."""
    raw = window.raw()
    z = norm.normalize(raw)
    norm.update(raw)
    return raw, z


def raw_from_ticks(ticks: list[Tick]) -> np.ndarray:
    """Stateless recomputation of the raw vector for the last tick of ``ticks``.

    Works from exact rational prices over an explicit tick list, with no
    ring-buffer state.
    """
    w = len(ticks)
    last = ticks[-1].book
    mid = Fraction(last.bid_px[0] + last.ask_px[0], 2)
    imb1 = order_imbalance(last, 1)
    cur = [
        float(Fraction(last.ask_px[0] - last.bid_px[0]) / mid),
        imb1,
        order_imbalance(last, 5),
        float((microprice(last) - mid) / mid),
    ]
    rets, dimb = [], []
    for lag in lag_set(w):
        prev = ticks[-1 - lag].book
        pmid = Fraction(prev.bid_px[0] + prev.ask_px[0], 2)
        rets.append(math.log1p(float((mid - pmid) / pmid)))
        dimb.append(imb1 - order_imbalance(prev, 1))
    return np.array(cur + rets + dimb)
