"""Latency and throughput of the live path over many synthetic securities."""
from __future__ import annotations

import gc
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .ensemble import EnsembleWeights
from .market_data import SessionSpec
from .online import PHASES, Engine, EngineConfig, PretrainConfig, StepRecord, pretrain
from .synthgen import GenParams, generate_day


@dataclass
class LatencyStats:
    n: int
    p50: float
    p90: float
    p99: float
    max: float
    mean: float

    @classmethod
    def from_ns(cls, samples) -> LatencyStats:
        a = np.asarray(samples, dtype=np.float64)
        if a.size == 0:
            return cls(0, 0.0, 0.0, 0.0, 0.0, 0.0)
        p50, p90, p99 = np.percentile(a, [50, 90, 99])
        return cls(int(a.size), float(p50), float(p90), float(p99), float(a.max()), float(a.mean()))


def _timed_run(weights: EnsembleWeights, cfg: EngineConfig, ticks) -> tuple[dict[str, list[int]], list[StepRecord], int, float]:
    eng = Engine(weights, cfg)
    timings: dict[str, list[int]] = {p: [] for p in PHASES}
    records = []
    # collector pauses land on arbitrary ticks; settle the heap before timing
    gc.collect()
    gc.freeze()
    t0 = time.perf_counter()
    try:
        for tick in ticks:
            records.append(eng.step(tick, timings))
    finally:
        wall = time.perf_counter() - t0
        gc.unfreeze()
    return timings, records, eng.update_count, wall


def _security_job(args) -> dict:
    weights, cfg, gen = args
    ticks = generate_day(gen)
    timings, _, updates, wall = _timed_run(weights, cfg, ticks)
    skip = cfg.W  # warmup ticks are not measured
    path = [
        r + f + p
        for r, f, p in zip(timings["resolve"][skip:], timings["features"][skip:], timings["predict"][skip:])
    ]
    return {
        "symbol": gen.symbol,
        "wall_s": wall,
        "updates": updates,
        "path": path,
        "phases": {k: (v[skip:] if k != "update" else v) for k, v in timings.items()},
    }


def timer_baseline(n: int = 100_000) -> LatencyStats:
    """Cost of the four clock reads that bracket each instrumented tick."""
    clock = time.perf_counter_ns
    out = []
    for _ in range(n):
        t0 = clock()
        clock()
        clock()
        t3 = clock()
        out.append(t3 - t0)
    return LatencyStats.from_ns(out)


def machine_info() -> dict:
    clk = time.get_clock_info("perf_counter")
    return {
        "cpu_count": os.cpu_count(),
        "processor": platform.processor() or platform.machine(),
        "platform": platform.platform(),
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "timer": clk.implementation,
        "timer_resolution_ns": clk.resolution * 1e9,
    }


def bench_engine(
    cfg: EngineConfig = EngineConfig(),
    n_ticks: int = 70_000,
    n_securities: int = 20,
    seed: int = 0,
    pcfg: PretrainConfig = PretrainConfig(),
    jobs: int = 1,
    pretrain_ticks: int = 20_000,
) -> dict:
    """Run ``n_securities`` independent engines and summarize per-tick latency.

    One model is pretrained on a separate synthetic day and shared read-only;
    each security gets its own seeded day and its own engine.
    """
    t0 = time.perf_counter()
    weights = pretrain([generate_day(GenParams(n_ticks=max(pretrain_ticks, cfg.W + cfg.H), seed=seed))], cfg, pcfg)
    pretrain_s = time.perf_counter() - t0

    jobs_args = [
        (weights, replace(cfg, symbol=f"SYN{i:02d}"), GenParams(n_ticks=n_ticks, seed=seed + 1 + i, symbol=f"SYN{i:02d}"))
        for i in range(n_securities)
    ]
    t0 = time.perf_counter()
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_security_job, jobs_args))
    else:
        results = [_security_job(a) for a in jobs_args]
    elapsed = time.perf_counter() - t0

    engine_s = sum(r["wall_s"] for r in results)
    path = [x for r in results for x in r["path"]]
    phases = {p: LatencyStats.from_ns([x for r in results for x in r["phases"][p]]) for p in PHASES}
    base = timer_baseline()
    session_s = (SessionSpec().close_ns - 2 * SessionSpec().trim_ns - SessionSpec().open_ns) / 1e9
    # engines run one per worker, so the engine-time bound is the busiest worker's share
    per_worker = engine_s / max(1, min(jobs, n_securities))
    return {
        "config": {**asdict(cfg), "hidden": list(pcfg.hidden), "n_ticks": n_ticks, "n_securities": n_securities,
                   "seed": seed, "jobs": jobs},
        "machine": machine_info(),
        "pretrain_s": pretrain_s,
        "elapsed_s": elapsed,
        "engine_s": engine_s,
        "engine_s_per_worker": per_worker,
        "session_s": session_s,
        "realtime_factor": session_s / per_worker if per_worker > 0 else float("inf"),
        "updates": sum(r["updates"] for r in results),
        "prediction_path": asdict(LatencyStats.from_ns(path)),
        "prediction_path_net_of_timer": asdict(LatencyStats.from_ns(np.asarray(path, dtype=np.float64) - base.p50)),
        "phases": {k: asdict(v) for k, v in phases.items()},
        "timer_baseline": asdict(base),
        "units": "ns",
    }
