import numpy as np

from tickmlp.bench import LatencyStats, _timed_run, bench_engine, timer_baseline
from tickmlp.ensemble import init_ensemble
from tickmlp.features import feature_dim
from tickmlp.online import EngineConfig, run_day


def test_stats_are_ordered():
    rng = np.random.default_rng(0)
    s = LatencyStats.from_ns(rng.exponential(1000, 5000))
    assert s.p50 <= s.p90 <= s.p99 <= s.max
    assert s.n == 5000
    assert LatencyStats.from_ns([]).n == 0


def test_timing_does_not_change_results(small_day):
    cfg = EngineConfig(W=250, H=20, B=25, lr_online=0.01)
    w = init_ensemble(feature_dim(250), (10, 10), seed=4)
    timings, records, updates, _ = _timed_run(w, cfg, small_day)
    plain = run_day(small_day, w, cfg)
    assert records == plain.records
    assert updates == plain.update_count == len(timings["update"])
    assert all(len(timings[p]) == len(small_day) for p in ("features", "predict", "resolve"))


def test_bench_report_shape():
    rep = bench_engine(EngineConfig(W=250, H=20, B=50), n_ticks=1500, n_securities=2, pretrain_ticks=1500)
    assert rep["updates"] > 0
    assert rep["prediction_path"]["n"] == 2 * (1500 - 250)
    assert rep["machine"]["cpu_count"] >= 1 and rep["machine"]["timer_resolution_ns"] > 0
    assert set(rep["phases"]) == {"features", "predict", "resolve", "update"}
    assert rep["realtime_factor"] > 1


def test_timer_baseline_small():
    assert timer_baseline(1000).p50 < 50_000
