"""Batch command line: ``learnattack {trial,sweep,bounds,compare}``.

Exit status is 0 on success, 1 for configuration or usage errors and 2 for
runtime failures.  Wall time goes to stderr, never into output files.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time

from . import bounds, report
from .config import ExperimentConfig, load_config
from .core import ConfigError
from .detector import false_alarm_bound
from .harness import run_trial, sweep

log = logging.getLogger("learnattack")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", required=True, help="experiment config file")
    common.add_argument("--seed", type=int, help="override the base seed (unsigned 64-bit)")
    common.add_argument("--trials", type=int, help="override the number of trials per grid point")
    common.add_argument("--out", help="output path (default stdout)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--threads", type=int, default=1, help="worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="learnattack", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("trial", parents=[common], help="one seeded trial with a trajectory dump")
    sub.add_parser("sweep", parents=[common], help="Monte Carlo over the configured grid")
    sub.add_parser("bounds", parents=[common], help="analytic bounds from parameters only")
    sub.add_parser("compare", parents=[common], help="empirical rates and bounds in long format")
    return p


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    over = {}
    if args.seed is not None:
        over["experiment.seed"] = args.seed
    if args.trials is not None:
        over["experiment.trials"] = args.trials
    if args.threads < 1:
        raise ConfigError("--threads must be at least 1")
    return cfg.with_overrides(over) if over else cfg


def cmd_trial(cfg: ExperimentConfig, args) -> str:
    out = run_trial(cfg, 0, keep_trajectory=True)
    tr = out.trajectory
    n = tr.dim
    summary = {
        "seed": out.seed,
        "gain": out.gain,
        "estimate": out.estimate,
        "attacked": out.attacked,
        "hijacked": out.hijacked,
        "alarm": out.alarm,
        "deceived": out.deceived,
        "statistic": out.statistic,
        "diverged_at": out.diverged_at,
        "valid": out.valid,
    }
    if args.format == "json":
        traj = {
            "states": tr.states.tolist(),
            "controls": tr.controls.tolist(),
            "observations": tr.observations.tolist(),
            "disturbances": tr.disturbances.tolist(),
            "hijacked": tr.hijacked.tolist(),
        }
        return report.json_value({"outcome": summary, "trajectory": traj}) + "\n"
    for k, v in summary.items():
        print(f"# {k}: {v}", file=sys.stderr)
    names = ["k"]
    for base in ("x", "u", "y", "w"):
        names += [base] if n == 1 else [f"{base}{i}" for i in range(n)]
    names.append("hijacked")
    rows = []
    for k in range(len(tr)):
        r = {"k": k, "hijacked": bool(tr.hijacked[k])}
        for base, arr in (("x", tr.states), ("u", tr.controls), ("y", tr.observations), ("w", tr.disturbances)):
            for i in range(n):
                r[base if n == 1 else f"{base}{i}"] = float(arr[k, i])
        rows.append(r)
    return report.csv_text(rows, names)


BOUND_COLUMNS = ("axis_name", "axis_value", "L", "T", "delta", "beta", "lb_thm1", "ub_cor1", "fa_bound")


def bounds_row(cfg: ExperimentConfig, axis=None, value=None) -> dict:
    row = {"axis_name": axis, "axis_value": value, "L": cfg.L, "T": cfg.T, "delta": cfg.delta}
    if cfg.plant_kind != "scalar":
        return row
    sigma2 = cfg.plant.noise_var
    row["fa_bound"] = false_alarm_bound(sigma2, cfg.delta, cfg.T)
    linear = cfg.policy.kind == "linear_gain" and cfg.privacy.kind == "none"
    beta = cfg.beta
    if beta is None and linear and cfg.prior.kind == "fixed":
        try:
            beta = bounds.beta_linear(cfg.prior.value, cfg.policy.gain, sigma2)
        except ValueError:
            beta = None
    row["beta"] = beta
    if beta is None or cfg.L < 1:
        return row
    row["lb_thm1"] = bounds.deception_lower_bound(cfg.delta, beta, cfg.L)
    if cfg.prior.kind == "uniform" and linear and not cfg.policy.depends_on_gain:
        m = bounds.second_moment_sum_linear(cfg.L, cfg.policy.gain, sigma2, cfg.plant.initial_var, R=cfg.prior.R)
        row["ub_cor1"] = bounds.g_upper_bound(m, sigma2, cfg.L, cfg.prior.R, cfg.delta, beta)
    return row


def cmd_bounds(cfg: ExperimentConfig, args) -> str:
    if cfg.sweep_axis is None:
        rows = [bounds_row(cfg)]
    else:
        rows = [bounds_row(cfg.with_overrides({cfg.sweep_axis: v}), cfg.sweep_axis, v) for v in cfg.sweep_values]
    if args.format == "json":
        return report.json_value(rows) + "\n"
    return report.csv_text(rows, BOUND_COLUMNS)


def cmd_sweep(cfg: ExperimentConfig, args) -> str:
    return report.report_text(sweep(cfg, threads=args.threads), args.format)


def cmd_compare(cfg: ExperimentConfig, args) -> str:
    rows = report.long_rows(report.rows_of(sweep(cfg, threads=args.threads)))
    if args.format == "json":
        return report.json_value(rows) + "\n"
    return report.csv_text(rows, report.LONG_COLUMNS)


COMMANDS = {"trial": cmd_trial, "sweep": cmd_sweep, "bounds": cmd_bounds, "compare": cmd_compare}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    start = time.perf_counter()
    try:
        cfg = _load(args)
        text = COMMANDS[args.command](cfg, args)
        report.write_text(text, args.out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - surface any runtime failure as exit 2
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"# wall time {time.perf_counter() - start:.2f} s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
