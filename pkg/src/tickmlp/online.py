"""Live engine: features, prediction, delayed labels and mini-batch updates.

Per tick, in this order:

1. samples whose horizon ends at this tick are labelled against its book and
   staged;
2. once ``B`` samples are staged the ensemble takes one SGD step per pairwise
   model and the new weights version replaces the old one;
3. the tick enters the trailing window;
4. if the window is warm, features are extracted, the current weights predict,
   and a pending sample is queued for tick ``t + H``.

A sample resolved at tick ``t`` can therefore influence the prediction at ``t``.
"""
from __future__ import annotations

import time
from collections import deque
from concurrent.futures import Executor
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .ensemble import ConfidenceScores, Decision, EnsembleWeights, decide, init_ensemble, predict, route, train_ovo
from .features import MAX_BASE_LAG, NormState, TickWindow, extract, feature_dim
from .labeler import Label, PendingSample, label_prices
from .market_data import Tick
from .metrics import MetricsTracker
from .neural import train_epochs
from .simulator import Portfolio


class InsufficientData(ValueError):
    pass


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EngineConfig:
    W: int = 500
    H: int = 100
    B: int = 100
    threshold: float = 0.5
    lr_online: float = 0.001
    symbol: str = "SYN"
    online: bool = True
    include_warmup: bool = True

    def validate(self) -> None:
        if self.W <= MAX_BASE_LAG:
            raise ConfigError(f"W={self.W} must exceed the largest feature lag ({MAX_BASE_LAG})")
        if self.H < 1:
            raise ConfigError("H must be >= 1")
        if self.B < 1:
            raise ConfigError("B must be >= 1")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError("threshold must lie in [0, 1]")
        if self.lr_online < 0:
            raise ConfigError("lr_online must be non-negative")

    @property
    def updates_enabled(self) -> bool:
        return self.online and self.lr_online > 0


@dataclass(frozen=True)
class PretrainConfig:
    hidden: tuple[int, ...] = (10, 10)
    lr: float = 0.01
    epochs: int = 5
    batch_size: int = 32
    no_move_cap: float = 3.0
    seed: int = 0

    def validate(self) -> None:
        if not self.hidden or min(self.hidden) <= 0:
            raise ConfigError("hidden layer sizes must be positive")
        if self.lr <= 0 or self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("invalid pretraining hyperparameters")


class StepRecord(NamedTuple):
    tick_index: int
    decision: Decision
    confidence: float | None
    weights_version: int
    warmup: bool
    scores: ConfidenceScores | None


PHASES = ("features", "predict", "resolve", "update")


class Engine:
    """One security's live pipeline. Not thread-safe; one engine per thread."""

    def __init__(self, weights: EnsembleWeights, cfg: EngineConfig, executor: Executor | None = None):
        cfg.validate()
        if weights.n_in != feature_dim(cfg.W):
            raise ConfigError(f"model expects {weights.n_in} features, W={cfg.W} yields {feature_dim(cfg.W)}")
        self.cfg = cfg
        self.weights = weights
        self.norm = weights.norm.copy()
        self.window = TickWindow(cfg.W)
        self.pending: deque[PendingSample] = deque()
        self.staged: list[tuple[np.ndarray, Label]] = []
        self.tick_index = 0
        self.update_count = 0
        self.tracker = MetricsTracker()
        self._truth: deque = deque()
        self._executor = executor

    def _train(self, batch: list[tuple[np.ndarray, Label]], norm: NormState) -> EnsembleWeights:
        X = np.array([f for f, _ in batch])
        y = np.array([int(l) for _, l in batch])
        return train_ovo(self.weights, X, y, self.cfg.lr_online, norm=norm)

    def step(self, tick: Tick, timings: dict[str, list[int]] | None = None) -> StepRecord:
        cfg = self.cfg
        idx = self.tick_index
        book = tick.book
        bid, ask = book.bid_px[0], book.ask_px[0]
        clock = time.perf_counter_ns if timings is not None else None
        if clock:
            t0 = clock()

        tq = self._truth
        if tq and tq[0][0] + cfg.H == idx:
            _, d, score, obid, oask = tq.popleft()
            self.tracker.record(d, label_prices(obid, oask, bid, ask), score)

        # (1) resolve matured samples
        pending = self.pending
        while pending and pending[0].resolve_at == idx:
            s = pending.popleft()
            self.staged.append((s.features, label_prices(s.origin_bid, s.origin_ask, bid, ask)))
        if clock:
            t1 = clock()
            timings["resolve"].append(t1 - t0)

        # (2) mini-batch update
        future = None
        updated = False
        if len(self.staged) >= cfg.B:
            batch, self.staged = self.staged[:cfg.B], self.staged[cfg.B:]
            if cfg.updates_enabled:
                if self._executor is not None:
                    future = self._executor.submit(self._train, batch, self.norm.copy())
                else:
                    self.weights = self._train(batch, self.norm.copy())
                    self.update_count += 1
                    updated = True
        if clock:
            t2 = clock()
            if updated:
                timings["update"].append(t2 - t1)

        # (3) + (4) window, features, prediction
        self.window.push(tick)
        warm = self.window.warm
        if warm:
            _, z = extract(self.window, self.norm)
        if future is not None:
            # the swap completes before any prediction at this tick
            self.weights = future.result()
            self.update_count += 1
        if clock:
            t3 = clock()
            timings["features"].append(t3 - t2)
        if warm:
            scores = predict(self.weights, z)
            decision, conf = decide(scores, cfg.threshold)
            pending.append(PendingSample(idx, z, bid, ask, idx + cfg.H))
            record = StepRecord(idx, decision, conf, self.weights.version, False, scores)
            tq.append((idx, decision, conf, bid, ask))
        else:
            record = StepRecord(idx, Decision.NO_CONFIDENCE, None, self.weights.version, True, None)
            if cfg.include_warmup:
                tq.append((idx, Decision.NO_CONFIDENCE, None, bid, ask))
        if clock:
            timings["predict"].append(clock() - t3)
        self.tick_index = idx + 1
        return record


@dataclass
class RunResult:
    records: list[StepRecord]
    weights: EnsembleWeights
    tracker: MetricsTracker
    portfolio: Portfolio
    update_count: int

    def summary(self, symbol: str) -> dict:
        return {
            "symbol": symbol,
            **self.tracker.summary(),
            "pnl_ticks": self.portfolio.realized,
            "updates": self.update_count,
            "weights_version_final": self.weights.version,
        }


def run_day(
    stream: Iterable[Tick],
    weights: EnsembleWeights,
    cfg: EngineConfig,
    executor: Executor | None = None,
) -> RunResult:
    eng = Engine(weights, cfg, executor)
    pf = Portfolio()
    records = []
    last = None
    for tick in stream:
        rec = eng.step(tick)
        pf.on_decision(rec.decision, tick.book, rec.tick_index)
        records.append(rec)
        last = tick
    if last is not None:
        pf.flatten(last.book, eng.tick_index - 1)
    return RunResult(records, eng.weights, eng.tracker, pf, eng.update_count)


def build_samples(days: Sequence[Sequence[Tick]], W: int, H: int, norm: NormState) -> tuple[np.ndarray, np.ndarray]:
    """Normalized features and labels for every tick with a full window and a horizon.

    Runs the same streaming extraction as the live engine, carrying ``norm``
    across days; the window restarts each day.
    """
    X, y = [], []
    for ticks in days:
        win = TickWindow(W)
        n = len(ticks)
        for t, tick in enumerate(ticks):
            win.push(tick)
            if win.warm:
                _, z = extract(win, norm)
                if t + H < n:
                    hz = ticks[t + H].book
                    X.append(z)
                    y.append(int(label_prices(tick.book.bid_px[0], tick.book.ask_px[0], hz.bid_px[0], hz.ask_px[0])))
    D = feature_dim(W)
    return np.array(X, dtype=np.float64).reshape(-1, D), np.array(y, dtype=np.int64)


def downsample_no_move(y: np.ndarray, cap: float, seed: int) -> np.ndarray:
    """Row indices kept after capping NO_MOVE at ``cap`` x the larger directional class."""
    nm = np.flatnonzero(y == Label.NO_MOVE)
    directional = max(int(np.sum(y == Label.UP)), int(np.sum(y == Label.DOWN)))
    limit = int(cap * directional)
    if directional == 0 or len(nm) <= limit:
        return np.arange(len(y))
    rng = np.random.Generator(np.random.PCG64(seed))
    keep_nm = rng.choice(nm, size=limit, replace=False)
    keep = np.concatenate([np.flatnonzero(y != Label.NO_MOVE), keep_nm])
    keep.sort()
    return keep


def pretrain(days: Sequence[Sequence[Tick]], cfg: EngineConfig, pcfg: PretrainConfig = PretrainConfig()) -> EnsembleWeights:
    cfg.validate()
    pcfg.validate()
    if not days:
        raise InsufficientData("need at least one prior day")
    D = feature_dim(cfg.W)
    norm = NormState(D)
    X, y = build_samples(days, cfg.W, cfg.H, norm)
    if len(y) == 0:
        raise InsufficientData(f"no day has the {cfg.W + cfg.H} ticks needed for one labelled sample")
    keep = downsample_no_move(y, pcfg.no_move_cap, pcfg.seed)
    X, y = X[keep], y[keep]

    init = init_ensemble(D, pcfg.hidden, pcfg.seed, norm=norm)
    models = list(init.models)
    for k, (idx, target) in enumerate(route(y)):
        if len(idx):
            models[k] = train_epochs(models[k], X[idx], target, pcfg.lr, pcfg.epochs, pcfg.batch_size, pcfg.seed * 3 + k + 1)
    meta = {
        "W": cfg.W,
        "H": cfg.H,
        "hidden": list(pcfg.hidden),
        "feature_version": 1,
        "train_samples": int(len(y)),
        "label_counts": [int(np.sum(y == c)) for c in range(3)],
    }
    return EnsembleWeights(*models, norm=norm, version=1, meta=meta)


def config_dict(cfg: EngineConfig) -> dict:
    return asdict(cfg)
