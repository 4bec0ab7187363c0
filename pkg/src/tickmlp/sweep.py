"""Parameter sweeps behind the figure-analogue CSVs.

Thresholds never feed back into the engine (training uses realized labels,
not decisions), so each configuration is simulated once and every confidence
bound is applied afterwards to the logged scores.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .ensemble import Decision, EnsembleWeights, decide
from .labeler import label_prices
from .market_data import Tick
from .metrics import MetricsTracker, calibrate_threshold
from .online import EngineConfig, PretrainConfig, RunResult, StepRecord, pretrain, run_day
from .simulator import Portfolio

log = logging.getLogger(__name__)

SWEEP_COLUMNS = [
    "figure", "mode", "W", "H", "B", "architecture", "threshold",
    "accuracy", "participation", "pnl_ticks", "updates", "runtime", "status",
]
FIG_FILES = {
    "fig4": "fig4_online_vs_frozen.csv",
    "fig5": "fig5_history_range.csv",
    "fig6": "fig6_batch.csv",
    "fig7": "fig7_arch.csv",
    "fig8": "fig8_confidence.csv",
}


@dataclass
class Evaluation:
    threshold: float
    tracker: MetricsTracker
    pnl_ticks: int


def _top(ticks: Sequence[Tick]) -> tuple[np.ndarray, np.ndarray]:
    return (
        np.fromiter((t.book.bid_px[0] for t in ticks), dtype=np.int64, count=len(ticks)),
        np.fromiter((t.book.ask_px[0] for t in ticks), dtype=np.int64, count=len(ticks)),
    )


def winning_directional(records: Sequence[StepRecord]) -> list[tuple[int, float]]:
    """(tick_index, score) for scored ticks whose argmax is UP or DOWN."""
    out = []
    for r in records:
        if r.scores is not None:
            d, s = decide(r.scores, 0.0)
            if d.actionable:
                out.append((r.tick_index, s))
    return out


def evaluate(
    records: Sequence[StepRecord],
    ticks: Sequence[Tick],
    H: int,
    threshold: float,
    start: int = 0,
    end: int | None = None,
    include_warmup: bool = True,
) -> Evaluation:
    """Metrics and P&L over ticks ``[start, end)`` at a fixed confidence bound."""
    bids, asks = _top(ticks)
    n = len(ticks)
    end = n if end is None else end
    tr = MetricsTracker()
    pf = Portfolio()
    for r in records[start:end]:
        t = r.tick_index
        d = Decision.NO_CONFIDENCE if r.scores is None else decide(r.scores, threshold)[0]
        pf.on_decision(d, ticks[t].book, t)
        if t + H < n and (include_warmup or not r.warmup):
            truth = label_prices(int(bids[t]), int(asks[t]), int(bids[t + H]), int(asks[t + H]))
            tr.record(d, truth, None if r.scores is None else max(r.scores))
    if end > start:
        pf.flatten(ticks[end - 1].book, end - 1)
    return Evaluation(threshold, tr, pf.realized)


def calibrate_on(records: Sequence[StepRecord], start: int, end: int, target: float) -> float:
    """Confidence bound that gives ``target`` % participation over ticks ``[start, end)``."""
    conf = [s for t, s in winning_directional(records[start:end])]
    if not conf:
        return 1.0
    return calibrate_threshold(conf, end - start, target)


def calibrated_eval(
    result: RunResult,
    ticks: Sequence[Tick],
    H: int,
    target: float = 10.0,
    calib_frac: float = 0.2,
    start: int = 0,
    end: int | None = None,
) -> Evaluation:
    """Calibrate on the first ``calib_frac`` of ``[start, end)``, evaluate on the rest."""
    end = len(ticks) if end is None else end
    cut = start + int(round(calib_frac * (end - start)))
    thr = calibrate_on(result.records, start, cut, target)
    return evaluate(result.records, ticks, H, thr, cut, end)


def arch_name(hidden: Sequence[int]) -> str:
    return "-".join(str(h) for h in hidden)


@dataclass
class SweepGrid:
    """Reduced desk-scale grid; each figure varies one axis around the default."""

    base: EngineConfig = field(default_factory=EngineConfig)
    pre: PretrainConfig = field(default_factory=PretrainConfig)
    history_range: tuple[tuple[int, int], ...] = ((250, 50), (250, 100), (500, 50), (500, 100), (500, 200), (1000, 100))
    batches: tuple[int, ...] = (50, 100, 200, 400)
    archs: tuple[tuple[int, ...], ...] = ((10,), (10, 10), (20, 20))
    fig4_batches: tuple[int, ...] = (50, 100, 200)
    thresholds: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(21))
    target: float = 10.0
    calib_frac: float = 0.2


class _Runner:
    def __init__(self, day1: Sequence[Tick], day2: Sequence[Tick], grid: SweepGrid):
        self.day1, self.day2, self.grid = day1, day2, grid
        self._models: dict = {}

    def model(self, W: int, H: int, hidden: tuple[int, ...]) -> EnsembleWeights:
        key = (W, H, hidden)
        if key not in self._models:
            self._models[key] = pretrain([self.day1], replace(self.grid.base, W=W, H=H), replace(self.grid.pre, hidden=hidden))
        return self._models[key]

    def row(self, figure: str, cfg: EngineConfig, hidden: tuple[int, ...]) -> dict:
        g = self.grid
        row = {
            "figure": figure, "mode": "online" if cfg.updates_enabled else "frozen",
            "W": cfg.W, "H": cfg.H, "B": cfg.B, "architecture": arch_name(hidden),
        }
        t0 = time.perf_counter()
        try:
            res = run_day(self.day2, self.model(cfg.W, cfg.H, hidden), cfg)
            ev = calibrated_eval(res, self.day2, cfg.H, g.target, g.calib_frac)
            row.update(
                threshold=ev.threshold, accuracy=ev.tracker.accuracy_or_nan(),
                participation=ev.tracker.participation(), pnl_ticks=ev.pnl_ticks,
                updates=res.update_count, status="ok",
            )
            row["_result"] = res
        except Exception as exc:  # a failed configuration must not abort the sweep
            log.exception("sweep row failed: %s", row)
            row.update(threshold="", accuracy="", participation="", pnl_ticks="", updates="", status=f"failed: {exc}")
        row["runtime"] = round(time.perf_counter() - t0, 3)
        return row


_WORKER: dict = {}


def _init_worker(day1, day2, grid) -> None:
    _WORKER["runner"] = _Runner(day1, day2, grid)


def _row_task(task: tuple[str, EngineConfig, tuple[int, ...]]) -> dict:
    row = _WORKER["runner"].row(*task)
    if task[0] != "fig8":
        row.pop("_result", None)  # keep the pickled reply small
    return row


def sweep(
    day1: Sequence[Tick],
    day2: Sequence[Tick],
    grid: SweepGrid | None = None,
    jobs: int = 1,
) -> dict[str, list[dict]]:
    """Pretrain on ``day1``, simulate ``day2``; one row list per figure analogue.

    With ``jobs > 1`` configurations run in worker processes; each worker
    pretrains its own models from the same seeds, so rows do not depend on
    which worker ran them.
    """
    grid = grid or SweepGrid()
    base = grid.base
    base_hidden = tuple(grid.pre.hidden)

    tasks = [("fig4", replace(base, B=B, online=on), base_hidden) for B in grid.fig4_batches for on in (True, False)]
    tasks += [("fig5", replace(base, W=W, H=H), base_hidden) for W, H in grid.history_range]
    tasks += [("fig6", replace(base, B=B), base_hidden) for B in grid.batches]
    tasks += [("fig7", base, tuple(h)) for h in grid.archs]
    tasks.append(("fig8", base, base_hidden))

    if jobs > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(day1, day2, grid)) as ex:
            rows = list(ex.map(_row_task, tasks))
    else:
        r = _Runner(day1, day2, grid)
        rows = [r.row(*t) for t in tasks]

    out: dict[str, list[dict]] = {k: [] for k in FIG_FILES}
    for row in rows[:-1]:
        row.pop("_result", None)
        out[row["figure"]].append(row)

    ref = rows[-1]
    res = ref.pop("_result", None)
    for thr in grid.thresholds:
        row = {k: ref[k] for k in ("figure", "mode", "W", "H", "B", "architecture", "updates", "status")}
        row["threshold"] = thr
        if res is not None:
            ev = evaluate(res.records, day2, base.H, thr)
            row.update(accuracy=ev.tracker.accuracy_or_nan(), participation=ev.tracker.participation(), pnl_ticks=ev.pnl_ticks)
        row["runtime"] = ref["runtime"]
        out["fig8"].append(row)
    return out


def _fmt(v) -> str:
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


def write_sweep(out: dict[str, list[dict]], out_dir: str | Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for fig, name in FIG_FILES.items():
        p = out_dir / name
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SWEEP_COLUMNS)
            for row in out.get(fig, []):
                w.writerow([_fmt(row.get(c, "")) for c in SWEEP_COLUMNS])
        paths.append(p)
    return paths
