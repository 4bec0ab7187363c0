"""Generate two synthetic days and run the full figure sweep on them.

    python scripts/run_sweep.py --out results/sweep --jobs 4
"""
import argparse
import sys
from pathlib import Path

from tickmlp.cli import main as cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--jobs", default="1")
    ap.add_argument("--n-ticks", default="70000")
    ap.add_argument("--quick", action="store_true")
    a = ap.parse_args()
    out = Path(a.out)
    days = [str(out / f"day{k}.csv") for k in (1, 2)]
    for seed, path in zip(("1", "2"), days):
        if rc := cli(["gen", "--seed", seed, "--n-ticks", a.n_ticks, "--out", path]):
            return rc
    return cli(["sweep", "--data", *days, "--jobs", a.jobs, "--out", str(out)] + (["--quick"] if a.quick else []))


if __name__ == "__main__":
    sys.exit(main())
