"""Command-line entry point: ``tickmlp <subcommand> [--config FILE] [flags]``.

Configuration is a flat dict of dotted keys (``engine.W``, ``gen.seed``, ...).
Values resolve as built-in defaults, then the JSON ``--config`` file, then
flags; later sources win. Unknown keys are rejected.

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .bench import bench_engine
from .ensemble import EnsembleWeights, decide
from .features import NormState, TickWindow, extract, feature_dim, feature_names
from .labeler import label_day
from .market_data import DataError, read_csv, write_csv
from .metrics import EmptyInput, calibrate_threshold, merge_all
from .neural import BadDims
from .online import ConfigError, EngineConfig, InsufficientData, PretrainConfig, RunResult, pretrain, run_day
from .simulator import write_trades
from .sweep import SweepGrid, sweep, write_sweep
from .synthgen import GenParams, InvalidParams, RegimeShift, generate_day

log = logging.getLogger("tickmlp")


class UsageError(Exception):
    pass


def _bool(v: Any) -> bool:
    if isinstance(v, bool):
        return v
    if isinstance(v, str) and v.lower() in ("true", "1", "yes", "false", "0", "no"):
        return v.lower() in ("true", "1", "yes")
    raise ValueError(f"not a boolean: {v!r}")


def _opt_float(v: Any) -> float | None:
    return None if v is None else float(v)


def _opt_int(v: Any) -> int | None:
    return None if v is None else int(v)


def _opt_str(v: Any) -> str | None:
    return None if v is None else str(v)


def _ints(v: Any) -> list[int]:
    if isinstance(v, str):
        v = [p for p in v.replace(",", " ").split() if p]
    return [int(x) for x in v]


def _paths(v: Any) -> list[str]:
    return [str(v)] if isinstance(v, str) else [str(x) for x in v]


def _int(v: Any) -> int:
    if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
        raise ValueError(f"not an integer: {v!r}")
    return int(v)


@dataclass(frozen=True)
class Key:
    default: Any
    conv: Callable[[Any], Any]
    help: str = ""


KEYS: dict[str, Key] = {
    "engine.W": Key(500, _int, "history window in ticks (must exceed 200)"),
    "engine.H": Key(100, _int, "prediction horizon in ticks"),
    "engine.B": Key(100, _int, "online update batch size"),
    "engine.threshold": Key(0.5, float, "confidence bound for actionable decisions"),
    "engine.lr_online": Key(0.001, float, "online SGD learning rate"),
    "engine.online": Key(True, _bool, "apply online updates"),
    "engine.include_warmup": Key(True, _bool, "count warmup ticks in metrics"),
    "gen.n_ticks": Key(70_000, _int),
    "gen.theta": Key(0.02, float),
    "gen.sigma": Key(0.5, float),
    "gen.sigma_m": Key(None, _opt_float),
    "gen.x0": Key(2000.0, float),
    "gen.qty_log_mean": Key(3.0, float),
    "gen.qty_log_std": Key(0.8, float),
    "gen.seed": Key(0, _int),
    "gen.symbol": Key("SYN", str),
    "gen.shift_at": Key(None, _opt_int),
    "gen.shift_theta": Key(None, _opt_float),
    "gen.shift_sigma": Key(None, _opt_float),
    "pretrain.hidden": Key([10, 10], _ints),
    "pretrain.lr": Key(0.01, float),
    "pretrain.epochs": Key(5, _int),
    "pretrain.batch_size": Key(32, _int),
    "pretrain.no_move_cap": Key(3.0, float),
    "pretrain.seed": Key(0, _int),
    "calibrate.target": Key(10.0, float, "participation target in percent"),
    "calibrate.frac": Key(0.2, float, "leading share of the day used to calibrate"),
    "bench.n_ticks": Key(70_000, _int),
    "bench.n_securities": Key(20, _int),
    "bench.seed": Key(0, _int),
    "bench.pretrain_ticks": Key(20_000, _int),
    "sweep.quick": Key(False, _bool, "smaller grid for smoke runs"),
    "paths.data": Key([], _paths),
    "paths.model": Key(None, _opt_str),
    "paths.scores": Key(None, _opt_str),
    "paths.out": Key(None, _opt_str),
    "jobs": Key(1, _int),
}


def resolve(file_cfg: dict, flags: dict) -> tuple[dict, set[str]]:
    """Merge defaults < file < flags; return the config and the keys set explicitly."""
    unknown = sorted(set(file_cfg) - set(KEYS))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    cfg = {k: key.default for k, key in KEYS.items()}
    given = set()
    for src in (file_cfg, flags):
        for k, v in src.items():
            try:
                cfg[k] = KEYS[k].conv(v)
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad value for {k}: {exc}") from exc
            given.add(k)
    if cfg["jobs"] < 1:
        raise UsageError("jobs must be >= 1")
    return cfg, given


def engine_config(c: dict, symbol: str = "SYN") -> EngineConfig:
    return EngineConfig(
        W=c["engine.W"], H=c["engine.H"], B=c["engine.B"], threshold=c["engine.threshold"],
        lr_online=c["engine.lr_online"], symbol=symbol, online=c["engine.online"],
        include_warmup=c["engine.include_warmup"],
    )


def pretrain_config(c: dict) -> PretrainConfig:
    return PretrainConfig(
        hidden=tuple(c["pretrain.hidden"]), lr=c["pretrain.lr"], epochs=c["pretrain.epochs"],
        batch_size=c["pretrain.batch_size"], no_move_cap=c["pretrain.no_move_cap"], seed=c["pretrain.seed"],
    )


def gen_params(c: dict) -> GenParams:
    shift = None
    parts = (c["gen.shift_at"], c["gen.shift_theta"], c["gen.shift_sigma"])
    if any(p is not None for p in parts):
        if any(p is None for p in parts):
            raise UsageError("a regime shift needs gen.shift_at, gen.shift_theta and gen.shift_sigma")
        shift = RegimeShift(*parts)
    return GenParams(
        n_ticks=c["gen.n_ticks"], theta=c["gen.theta"], sigma=c["gen.sigma"], sigma_m=c["gen.sigma_m"],
        x0=c["gen.x0"], qty_log_mean=c["gen.qty_log_mean"], qty_log_std=c["gen.qty_log_std"],
        regime_shift=shift, seed=c["gen.seed"], symbol=c["gen.symbol"],
    )


# ---------------------------------------------------------------- artifacts


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(path: Path, obj: Any) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_manifest(path: Path, command: str, c: dict, inputs: Sequence[str], outputs: Sequence[Path]) -> None:
    """Resolved config, input digests and output names; no timestamps, so reruns match."""
    _dump_json(path, {
        "tool": "tickmlp",
        "version": __version__,
        "command": command,
        "config": c,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": sorted(Path(p).name for p in outputs),
    })


def _fmt(x: float | None) -> str:
    return "" if x is None else repr(float(x))


def write_decisions(path: Path, res: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick_index", "decision", "confidence", "weights_version", "warmup"])
        for r in res.records:
            w.writerow([r.tick_index, r.decision.name, _fmt(r.confidence), r.weights_version, int(r.warmup)])


def write_scores(path: Path, res: RunResult) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick_index", "up", "no_move", "down"])
        for r in res.records:
            s = r.scores
            w.writerow([r.tick_index, *((_fmt(v) for v in s) if s is not None else ("", "", ""))])


def read_scores(path: str | Path) -> list[tuple[float, float, float] | None]:
    out: list[tuple[float, float, float] | None] = []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        if next(rows, None) != ["tick_index", "up", "no_move", "down"]:
            raise DataError(f"{path}: not a scores file")
        for n, row in enumerate(rows, start=2):
            if len(row) != 4:
                raise DataError(f"{path}:{n}: expected 4 fields")
            try:
                out.append(None if row[1] == "" else (float(row[1]), float(row[2]), float(row[3])))
            except ValueError as exc:
                raise DataError(f"{path}:{n}: {exc}") from exc
    return out


def _read_day(path: str) -> list:
    ticks = read_csv(path)
    if not ticks:
        raise DataError(f"{path}: no ticks")
    return ticks


def _need(c: dict, key: str, what: str) -> Any:
    v = c[key]
    if v is None or v == []:
        raise UsageError(f"missing {what} (flag or config key {key})")
    return v


# ---------------------------------------------------------------- commands


def cmd_gen(c: dict, given: set[str]) -> int:
    out = Path(_need(c, "paths.out", "--out"))
    params = gen_params(c)
    params.validate()
    out.parent.mkdir(parents=True, exist_ok=True)
    write_csv(out, generate_day(params))
    write_manifest(out.with_name(out.stem + ".manifest.json"), "gen", c, [], [out])
    return 0


def cmd_pretrain(c: dict, given: set[str]) -> int:
    data = _need(c, "paths.data", "--data")
    out = Path(_need(c, "paths.out", "--out"))
    ecfg, pcfg = engine_config(c), pretrain_config(c)
    ecfg.validate()
    pcfg.validate()
    days = [_read_day(p) for p in data]
    weights = pretrain(days, ecfg, pcfg)
    out.parent.mkdir(parents=True, exist_ok=True)
    weights.save(out)
    write_manifest(out.with_name(out.stem + ".manifest.json"), "pretrain", c, data, [out])
    return 0


def _run_one(args: tuple[str, str, dict, Path]) -> dict:
    data_path, model_path, c, out = args
    ticks = _read_day(data_path)
    weights = EnsembleWeights.load(model_path)
    cfg = engine_config(c, symbol=ticks[0].symbol)
    res = run_day(ticks, weights, cfg)
    out.mkdir(parents=True, exist_ok=True)
    files = [out / n for n in ("decisions.csv", "scores.csv", "trades.csv", "metrics.json", "weights_final.json")]
    write_decisions(files[0], res)
    write_scores(files[1], res)
    write_trades(files[2], res.portfolio.trades)
    summary = res.summary(cfg.symbol)
    _dump_json(files[3], summary)
    res.weights.save(files[4])
    write_manifest(out / "manifest.json", "run", {**c, "paths.data": [data_path], "paths.out": str(out)},
                   [data_path, model_path], files)
    return {"summary": summary, "tracker": res.tracker}


def _check_model_shape(c: dict, given: set[str], model_path: str) -> None:
    meta = EnsembleWeights.load(model_path).meta
    for key, name in (("engine.W", "W"), ("engine.H", "H")):
        if name not in meta:
            continue
        if key in given and c[key] != meta[name]:
            raise UsageError(f"{key}={c[key]} but the model was pretrained with {name}={meta[name]}")
        c[key] = meta[name]


def cmd_run(c: dict, given: set[str]) -> int:
    data = _need(c, "paths.data", "--data")
    model = _need(c, "paths.model", "--model")
    out = Path(_need(c, "paths.out", "--out"))
    engine_config(c).validate()
    _check_model_shape(c, given, model)
    engine_config(c).validate()
    single = len(data) == 1
    jobs = [(p, model, c, out if single else out / Path(p).stem) for p in data]
    if c["jobs"] > 1 and not single:
        with ProcessPoolExecutor(c["jobs"]) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    if not single:
        merged = merge_all(r["tracker"] for r in results)
        _dump_json(out / "metrics.json", {
            "securities": [r["summary"] for r in results],
            "combined": {**merged.summary(), "pnl_ticks": sum(r["summary"]["pnl_ticks"] for r in results)},
        })
        write_manifest(out / "manifest.json", "run", c, [*data, model], [out / "metrics.json"])
    for r in results:
        print(json.dumps(r["summary"], sort_keys=True))
    return 0


def cmd_calibrate(c: dict, given: set[str]) -> int:
    path = _need(c, "paths.scores", "--scores")
    rows = read_scores(path)
    frac = c["calibrate.frac"]
    if not 0.0 < frac <= 1.0:
        raise UsageError("calibrate.frac must lie in (0, 1]")
    n = max(1, int(round(frac * len(rows))))
    part = rows[:n]
    conf = [s for d, s in (decide(r, 0.0) for r in part if r is not None) if d.actionable]
    try:
        thr = calibrate_threshold(conf, len(part), c["calibrate.target"])
    except EmptyInput as exc:
        raise DataError(f"{path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    achieved = 100.0 * sum(s >= thr for s in conf) / len(part)
    report = {"threshold": thr, "target_pct": c["calibrate.target"], "achieved_pct": achieved, "rows": len(part)}
    print(json.dumps(report, sort_keys=True))
    if c["paths.out"]:
        out = Path(c["paths.out"])
        out.mkdir(parents=True, exist_ok=True)
        _dump_json(out / "calibration.json", report)
        write_manifest(out / "manifest.json", "calibrate", c, [path], [out / "calibration.json"])
    return 0


def cmd_sweep(c: dict, given: set[str]) -> int:
    data = _need(c, "paths.data", "--data")
    if len(data) != 2:
        raise UsageError("sweep needs exactly two day files: pretraining day, then evaluation day")
    out = Path(_need(c, "paths.out", "--out"))
    base, pre = engine_config(c), pretrain_config(c)
    base.validate()
    pre.validate()
    grid = SweepGrid(base=base, pre=pre, target=c["calibrate.target"], calib_frac=c["calibrate.frac"])
    if c["sweep.quick"]:
        grid = replace(grid, history_range=((250, 100), (500, 100)), batches=(50, 200), archs=((10,), (10, 10)),
                       fig4_batches=(100,))
    day1, day2 = (_read_day(p) for p in data)
    paths = write_sweep(sweep(day1, day2, grid, jobs=c["jobs"]), out)
    write_manifest(out / "manifest.json", "sweep", c, data, paths)
    return 0


def cmd_bench(c: dict, given: set[str]) -> int:
    cfg = engine_config(c)
    cfg.validate()
    report = bench_engine(
        cfg, n_ticks=c["bench.n_ticks"], n_securities=c["bench.n_securities"], seed=c["bench.seed"],
        pcfg=pretrain_config(c), jobs=c["jobs"], pretrain_ticks=c["bench.pretrain_ticks"],
    )
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if c["paths.out"]:
        out = Path(c["paths.out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(text + "\n")
        write_manifest(out / "manifest.json", "bench", c, [], [out / "bench.json"])
    return 0


def cmd_features(c: dict, given: set[str]) -> int:
    data = _need(c, "paths.data", "--data")
    out = Path(_need(c, "paths.out", "--out"))
    W = c["engine.W"]
    engine_config(c).validate()
    if c["paths.model"]:
        model = EnsembleWeights.load(c["paths.model"])
        norm = model.norm.copy()
        if norm.dim != feature_dim(W):
            raise UsageError(f"model expects {norm.dim} features, W={W} gives {feature_dim(W)}")
    else:
        norm = NormState(feature_dim(W))
    names = feature_names(W)
    win = TickWindow(W)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick_index", *(f"raw_{n}" for n in names), *(f"z_{n}" for n in names)])
        for p in data:
            for i, tick in enumerate(_read_day(p)):
                win.push(tick)
                if win.warm:
                    raw, z = extract(win, norm)
                    w.writerow([i, *map(repr, raw.tolist()), *map(repr, z.tolist())])
    write_manifest(out.with_name(out.stem + ".manifest.json"), "features", c, data, [out])
    return 0


def cmd_label(c: dict, given: set[str]) -> int:
    data = _need(c, "paths.data", "--data")
    out = Path(_need(c, "paths.out", "--out"))
    if c["engine.H"] < 1:
        raise UsageError("engine.H must be >= 1")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tick_index", "label"])
        for p in data:
            for i, lab in enumerate(label_day(_read_day(p), c["engine.H"])):
                w.writerow([i, lab.name])
    write_manifest(out.with_name(out.stem + ".manifest.json"), "label", c, data, [out])
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "pretrain": cmd_pretrain,
    "run": cmd_run,
    "sweep": cmd_sweep,
    "calibrate": cmd_calibrate,
    "bench": cmd_bench,
    "features": cmd_features,
    "label": cmd_label,
}


# ---------------------------------------------------------------- parser


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _flag(p: argparse.ArgumentParser, name: str, key: str, **kw) -> None:
    k = KEYS[key]
    kw.setdefault("help", k.help or f"config key {key}")
    p.add_argument(name, dest=key, default=argparse.SUPPRESS, **kw)


_ENGINE = [("--w", "engine.W"), ("--h", "engine.H"), ("--b", "engine.B"),
           ("--threshold", "engine.threshold"), ("--lr-online", "engine.lr_online")]
_PRETRAIN = [("--hidden", "pretrain.hidden"), ("--lr", "pretrain.lr"), ("--epochs", "pretrain.epochs"),
             ("--batch-size", "pretrain.batch_size"), ("--no-move-cap", "pretrain.no_move_cap")]


def _online_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--frozen", dest="engine.online", action="store_const", const=False, default=argparse.SUPPRESS,
                   help="disable online updates (constant weights)")
    p.add_argument("--exclude-warmup", dest="engine.include_warmup", action="store_const", const=False,
                   default=argparse.SUPPRESS, help="leave warmup ticks out of the metrics")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tickmlp", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"tickmlp {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def new(name: str, help: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help)
        p.add_argument("--config", help="JSON file of dotted config keys")
        return p

    p = new("gen", "write one synthetic trading day as CSV")
    for name, key in [("--seed", "gen.seed"), ("--n-ticks", "gen.n_ticks"), ("--theta", "gen.theta"),
                      ("--sigma", "gen.sigma"), ("--sigma-m", "gen.sigma_m"), ("--x0", "gen.x0"),
                      ("--qty-log-mean", "gen.qty_log_mean"), ("--qty-log-std", "gen.qty_log_std"),
                      ("--symbol", "gen.symbol"), ("--shift-at", "gen.shift_at"),
                      ("--shift-theta", "gen.shift_theta"), ("--shift-sigma", "gen.shift_sigma")]:
        _flag(p, name, key)
    _flag(p, "--out", "paths.out", help="output CSV path")

    p = new("pretrain", "fit the pairwise ensemble on prior days")
    _flag(p, "--data", "paths.data", nargs="+", help="day CSV files")
    for name, key in _ENGINE[:2] + _PRETRAIN:
        _flag(p, name, key)
    _flag(p, "--seed", "pretrain.seed")
    _flag(p, "--out", "paths.out", help="output model JSON path")

    p = new("run", "stream days through the online engine")
    _flag(p, "--data", "paths.data", nargs="+", help="day CSV files, one per security")
    _flag(p, "--model", "paths.model", help="pretrained model JSON")
    for name, key in _ENGINE:
        _flag(p, name, key)
    _online_flags(p)
    _flag(p, "--jobs", "jobs", help="worker processes, one security each")
    _flag(p, "--out", "paths.out", help="output directory")

    p = new("sweep", "figure-analogue parameter sweeps over two days")
    _flag(p, "--data", "paths.data", nargs=2, help="pretraining day, evaluation day")
    for name, key in _ENGINE + _PRETRAIN:
        _flag(p, name, key)
    _flag(p, "--seed", "pretrain.seed")
    _flag(p, "--target", "calibrate.target")
    _flag(p, "--calib-frac", "calibrate.frac")
    p.add_argument("--quick", dest="sweep.quick", action="store_const", const=True, default=argparse.SUPPRESS,
                   help=KEYS["sweep.quick"].help)
    _flag(p, "--jobs", "jobs", help="worker processes, one configuration each")
    _flag(p, "--out", "paths.out", help="output directory")

    p = new("calibrate", "confidence bound for a participation target from a scores.csv")
    _flag(p, "--scores", "paths.scores", help="scores.csv written by run")
    _flag(p, "--target", "calibrate.target")
    _flag(p, "--frac", "calibrate.frac")
    _flag(p, "--out", "paths.out", help="optional output directory")

    p = new("bench", "latency and throughput report as JSON")
    for name, key in [("--n-ticks", "bench.n_ticks"), ("--n-securities", "bench.n_securities"),
                      ("--seed", "bench.seed"), ("--pretrain-ticks", "bench.pretrain_ticks")]:
        _flag(p, name, key)
    for name, key in _ENGINE + _PRETRAIN[:1]:
        _flag(p, name, key)
    _online_flags(p)
    _flag(p, "--jobs", "jobs")
    _flag(p, "--out", "paths.out", help="optional output directory")

    p = new("features", "dump raw and normalized feature vectors per tick")
    _flag(p, "--data", "paths.data", nargs="+")
    _flag(p, "--w", "engine.W")
    _flag(p, "--model", "paths.model", help="start from this model's normalization state")
    _flag(p, "--out", "paths.out", help="output CSV path")

    p = new("label", "dump ground-truth labels per tick")
    _flag(p, "--data", "paths.data", nargs="+")
    _flag(p, "--h", "engine.H")
    _flag(p, "--out", "paths.out", help="output CSV path")
    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config file must hold a JSON object of dotted keys")
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = vars(parser.parse_args(argv))
        command = ns.pop("command")
        verbose = ns.pop("verbose")
        logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")
        file_cfg = _load_config(ns.pop("config", None))
        c, given = resolve(file_cfg, ns)
        return COMMANDS[command](c, given)
    except (UsageError, ConfigError, InvalidParams) as exc:
        print(f"tickmlp: usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, InsufficientData, BadDims, OSError, json.JSONDecodeError, KeyError) as exc:
        print(f"tickmlp: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
