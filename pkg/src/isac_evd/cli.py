"""``isac-evd`` command line.

Exit codes: 0 success, 1 a validation check failed, 2 bad usage or config.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import experiments
from .montecarlo import Scaling
from .system_model import ConfigError, calibrated_config_path, load_config

DEFAULT_OUT = "results"


def _int_list(text: str):
    try:
        values = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values or any(v < 1 for v in values):
        raise argparse.ArgumentTypeError("antenna counts must be positive")
    return values


def _float_list(text: str):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _range(start: float, stop: float, step: float) -> np.ndarray:
    if step <= 0 or stop < start:
        raise ConfigError("ranges need step > 0 and stop >= start")
    return np.arange(start, stop + step * 1e-6, step)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="flat TOML scenario (default: shipped calibration)")
    common.add_argument("--seed", type=int, default=None, help="overrides the seed in the config")
    common.add_argument("--out", type=Path, default=Path(DEFAULT_OUT), help="output directory")
    common.add_argument("--scaling", choices=[s.value for s in Scaling], default=Scaling.SAMPLE_MEAN.value)
    common.add_argument("--workers", type=int, default=1, help="threads for independent sweep points")
    common.add_argument("--no-figures", action="store_true", help="write CSV/JSON only")

    parser = argparse.ArgumentParser(prog="isac-evd", description="Eigenvalue detection in ISAC: figures and checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[common], help="analytic vs simulated cross-checks")
    p.add_argument("--trials", type=int, default=100_000)

    p = sub.add_parser("roc", parents=[common], help="ROC curves per antenna count")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--nt", type=_int_list, default=[1, 2, 8])
    p.add_argument("--points", type=int, default=200)

    p = sub.add_parser("rate-sweep", parents=[common], help="ergodic rate vs communication power")
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--nt", type=_int_list, default=[1, 2, 4, 8])
    p.add_argument("--pc-min", type=float, default=0.0)
    p.add_argument("--pc-max", type=float, default=20.0)
    p.add_argument("--pc-step", type=float, default=0.5)

    p = sub.add_parser("error-vs-threshold", parents=[common], help="total error vs threshold")
    p.add_argument("--nt", type=_int_list, default=[1, 2, 8])
    p.add_argument("--points", type=int, default=300)

    p = sub.add_parser("sweep-power", parents=[common], help="joint design vs CFAR over total power")
    p.add_argument("--nt", type=_int_list, default=[1, 2, 8])
    p.add_argument("--r-min", type=float, default=5.0)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--p-min", type=float, default=4.0)
    p.add_argument("--p-max", type=float, default=14.0)
    p.add_argument("--p-step", type=float, default=0.25)

    p = sub.add_parser("sweep-rmin", parents=[common], help="joint design over the rate target")
    p.add_argument("--powers", type=_float_list, default=[8.0, 10.0, 12.0])
    p.add_argument("--r-min-min", type=float, default=0.25)
    p.add_argument("--r-min-max", type=float, default=10.0)
    p.add_argument("--r-min-step", type=float, default=0.25)
    return parser


def _emit(tables, args) -> list:
    paths = []
    for table in tables:
        paths += experiments.write_table(table, args.out)
        if not args.no_figures:
            from . import plotting

            paths += plotting.render(table, args.out)
    for path in paths:
        print(f"wrote {path}")
    return paths


def run(args) -> int:
    config = load_config(args.config or calibrated_config_path())
    if args.seed is not None:
        config = config.replace(seed=args.seed)
    if getattr(args, "trials", 1) < 1:
        raise ConfigError("--trials must be positive")
    scaling = Scaling(args.scaling)
    w = args.workers

    if args.command == "validate":
        report = experiments.cmd_validate(config, args.trials, scaling=scaling)
        meta = experiments.table_metadata(config, config.seed, scaling, trials=args.trials)
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "validate.txt").write_text(report.text(), encoding="utf-8")
        sys.stdout.write(report.text())
        _emit([report.table(meta)], args)
        return 0 if report.passed else 1
    if args.command == "roc":
        table = experiments.cmd_roc(config, args.nt, args.trials, scaling=scaling, points=args.points, workers=w)
    elif args.command == "rate-sweep":
        pc = _range(args.pc_min, args.pc_max, args.pc_step)
        table = experiments.cmd_rate_sweep(config, args.nt, pc, args.trials, workers=w)
    elif args.command == "error-vs-threshold":
        table = experiments.cmd_error_vs_threshold(config, args.nt, scaling=scaling, points=args.points, workers=w)
    elif args.command == "sweep-power":
        p = _range(args.p_min, args.p_max, args.p_step)
        table = experiments.cmd_sweep_power(config, args.nt, p, args.r_min, args.alpha, scaling, workers=w)
    else:
        r = _range(args.r_min_min, args.r_min_max, args.r_min_step)
        table = experiments.cmd_sweep_rmin(config, args.powers, r, scaling, workers=w)
    _emit([table], args)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except ConfigError as exc:
        print(f"isac-evd: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
