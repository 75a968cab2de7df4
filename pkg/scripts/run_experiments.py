"""Run the sweep of every shipped config and write one CSV per config.

    python3 scripts/run_experiments.py --out-dir results [--trials N] [--only ex1 ex2]
"""

import argparse
import sys
import time
from pathlib import Path

from learnattack import load_config, sweep
from learnattack.report import emit_report

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out-dir", default="results")
    p.add_argument("--trials", type=int, help="override trials per grid point")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--only", nargs="*", help="config stems to run (default all)")
    args = p.parse_args(argv)

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for path in sorted(CONFIGS.glob("*.cfg")):
        if args.only and path.stem not in args.only:
            continue
        start = time.perf_counter()
        rep = sweep(load_config(path), n=args.trials, threads=args.threads)
        target = out / f"{path.stem}.{args.format}"
        emit_report(rep, args.format, target)
        print(f"{path.stem}: {len(rep.points)} points -> {target} ({time.perf_counter() - start:.1f} s)",
              file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
