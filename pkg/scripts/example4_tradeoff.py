"""LQ cost and deception rate of the recursive privacy signal against the
unauthenticated controller, for a list of eta values.

    python3 scripts/example4_tradeoff.py --eta 2 3 5 --out tradeoff.csv
"""

import argparse
import sys
from pathlib import Path

from learnattack import load_config, monte_carlo
from learnattack.report import csv_text, write_text

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--eta", type=float, nargs="+", default=[2.0, 3.0, 5.0])
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--out", default="-")
    args = p.parse_args(argv)

    lq, dec = load_config(CONFIGS / "ex4-lq.cfg"), load_config(CONFIGS / "ex4-dec.cfg")
    settings = [("none", {"controller.privacy": "none"})] + [
        (str(e), {"controller.eta": e}) for e in args.eta]
    rows = []
    for i, (label, over) in enumerate(settings):
        cost = monte_carlo(lq.with_overrides(over), args.trials, grid_index=i)
        att = monte_carlo(dec.with_overrides(over), args.trials, grid_index=i)
        rows.append({"eta": label, "lq_cost_mean": cost.lq_cost_mean, "p_dec": att.rate, "stderr": att.stderr})
    write_text(csv_text(rows, ("eta", "lq_cost_mean", "p_dec", "stderr")), args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
