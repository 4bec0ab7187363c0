"""Deterministic synthetic tick days with mean-reverting mids.

The mid follows a discrete Ornstein-Uhlenbeck recursion around a slowly
drifting mean::

    x[k+1] = x[k] + theta * (m[k] - x[k]) + sigma * eps[k]
    m[k+1] = m[k] + sigma_m * eta[k]

All prices are in tick units. Randomness comes from numpy's ``PCG64`` bit
generator seeded with ``GenParams.seed``; draws are taken in a fixed order
(eps, eta, spreads, level quantities, trade sides, trade quantities) so a
given seed yields the same CSV bytes for a given numpy release.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .market_data import LEVELS, BookSnapshot, SessionSpec, Tick


class InvalidParams(ValueError):
    pass


@dataclass(frozen=True)
class RegimeShift:
    at: int
    theta: float
    sigma: float


@dataclass(frozen=True)
class GenParams:
    n_ticks: int = 70_000
    theta: float = 0.02
    sigma: float = 0.5
    # arbitrary: Fig-2 style drift has no published magnitude
    sigma_m: float | None = None
    x0: float = 2000.0
    m0: float | None = None
    spread_dist: tuple[float, float, float] = (0.5, 0.35, 0.15)
    qty_log_mean: float = 3.0
    qty_log_std: float = 0.8
    regime_shift: RegimeShift | None = None
    seed: int = 0
    symbol: str = "SYN"
    session: SessionSpec = field(default_factory=SessionSpec)

    @property
    def mean_drift(self) -> float:
        return 0.02 * self.sigma if self.sigma_m is None else self.sigma_m

    def validate(self) -> None:
        if self.n_ticks <= 0:
            raise InvalidParams("n_ticks must be positive")
        if not 0.0 < self.theta < 1.0:
            raise InvalidParams("theta must lie in (0, 1)")
        if self.sigma < 0 or self.mean_drift < 0:
            raise InvalidParams("sigma and sigma_m must be non-negative")
        if len(self.spread_dist) != 3 or min(self.spread_dist) < 0 or not np.isclose(sum(self.spread_dist), 1.0):
            raise InvalidParams("spread_dist must be a distribution over 1, 2, 3 ticks")
        if not 0 <= self.seed < 2**64:
            raise InvalidParams("seed must be a 64-bit unsigned integer")
        rs = self.regime_shift
        if rs is not None:
            if not 0 <= rs.at < self.n_ticks:
                raise InvalidParams("regime shift index must lie in [0, n_ticks)")
            if not 0.0 < rs.theta < 1.0 or rs.sigma < 0:
                raise InvalidParams("invalid post-shift theta/sigma")


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def simulate_mid(params: GenParams, rng: np.random.Generator | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, m)``: the latent mid path and its drifting mean."""
    params.validate()
    rng = make_rng(params.seed) if rng is None else rng
    n = params.n_ticks
    eps = rng.standard_normal(n)
    eta = rng.standard_normal(n)

    theta = np.full(n, params.theta)
    sigma = np.full(n, params.sigma)
    if params.regime_shift is not None:
        theta[params.regime_shift.at:] = params.regime_shift.theta
        sigma[params.regime_shift.at:] = params.regime_shift.sigma

    m = np.empty(n)
    m[0] = params.x0 if params.m0 is None else params.m0
    m[1:] = m[0] + np.cumsum(params.mean_drift * eta[:-1])

    x = np.empty(n)
    xk = float(params.x0)
    drive = theta * m
    keep = 1.0 - theta
    noise = sigma * eps
    # the regime in force at step k governs the move k -> k+1
    for k in range(n):
        x[k] = xk
        xk = keep[k] * xk + drive[k] + noise[k]
    return x, m


def generate_day(params: GenParams) -> list[Tick]:
    rng = make_rng(params.seed)
    x, _ = simulate_mid(params, rng)
    n = params.n_ticks

    spreads = rng.choice(np.arange(1, 4), size=n, p=np.asarray(params.spread_dist))
    qty = np.maximum(1, np.rint(rng.lognormal(params.qty_log_mean, params.qty_log_std, size=(n, 2 * LEVELS)))).astype(np.int64)
    buy_side = rng.integers(0, 2, size=n)
    last_qty = np.rint(rng.lognormal(params.qty_log_mean, params.qty_log_std, size=n)).astype(np.int64)

    center = np.rint(x).astype(np.int64)
    bids = center - (spreads + 1) // 2
    asks = bids + spreads

    s = params.session
    start = s.open_ns + s.trim_ns
    step = (s.close_ns - s.trim_ns - start) // n
    offs = tuple(range(LEVELS))

    out = []
    for k in range(n):
        b = int(bids[k])
        a = int(asks[k])
        q = qty[k].tolist()
        book = BookSnapshot(
            tuple(b - i for i in offs), tuple(q[:LEVELS]),
            tuple(a + i for i in offs), tuple(q[LEVELS:]),
        )
        out.append(Tick(start + k * step, params.symbol, a if buy_side[k] else b, int(last_qty[k]), book))
    return out


def regime_stream(params: GenParams) -> list[Tick]:
    """Like :func:`generate_day` but requires a regime shift to be set."""
    if params.regime_shift is None:
        raise InvalidParams("regime_stream needs params.regime_shift")
    return generate_day(params)


def with_seed(params: GenParams, seed: int) -> GenParams:
    return replace(params, seed=seed)
