"""Deception rate over (learning length, privacy-signal variance) for the
scalar i.i.d. privacy config.  Writes a long-format CSV.

    python3 scripts/privacy_grid.py --out privacy_grid.csv
"""

import argparse
import sys
from pathlib import Path

from learnattack import load_config, monte_carlo
from learnattack.report import csv_text, write_text

CONFIG = Path(__file__).resolve().parents[1] / "configs" / "ex3.cfg"


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="-")
    p.add_argument("--trials", type=int, default=500)
    p.add_argument("--L", type=int, nargs="+", default=[5, 10, 20, 40, 80])
    p.add_argument("--var", type=float, nargs="+", default=[0.0, 9.0, 16.0])
    args = p.parse_args(argv)

    base = load_config(CONFIG)
    rows, g = [], 0
    for L in args.L:
        for var in args.var:
            c = base.with_overrides({"attack.L": L, "controller.privacy_var": var})
            r = monte_carlo(c, args.trials, grid_index=g)
            rows.append({"L": L, "privacy_var": var, "p_dec": r.rate, "stderr": r.stderr})
            g += 1
    write_text(csv_text(rows, ("L", "privacy_var", "p_dec", "stderr")), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
