"""Command-line entry point: ``beamsim run`` and ``beamsim calibrate``."""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .config import PRESETS, ConfigError, ExperimentConfig, load_config, preset
from .sim_harness import run_experiment, write_exceed_csv
from .threshold_calibration import Unreachable, calibrate, exceed_curves


def _build_parser():
    parser = argparse.ArgumentParser(prog="beamsim", description="Q-learning beam tracking simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV curves")
    run.add_argument("--config", help="INI config file")
    run.add_argument("--preset", choices=PRESETS, help="start from a named experiment")
    run.add_argument("--trials", type=int, help="number of Monte-Carlo trials")
    run.add_argument("--seed", type=int, help="master seed")
    run.add_argument("--workers", type=int, help="worker processes")
    run.add_argument("--out", default="results", help="output directory (default: results)")

    cal = sub.add_parser("calibrate", help="calibrate reward thresholds and write exceedance curves")
    cal.add_argument("--snr", type=float, default=20.0, help="observation SNR in dB")
    cal.add_argument("--target", type=float, default=0.1, help="false-reward probability target")
    cal.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo samples per point")
    cal.add_argument("--seed", type=int, default=0)
    cal.add_argument("--out", default="calibration", help="output directory (default: calibration)")
    return parser


def _run(args):
    base = preset(args.preset) if args.preset else ExperimentConfig()
    cfg = load_config(args.config, base) if args.config else base
    # an explicit --preset wins over the file's experiment name
    if args.preset and cfg.name != args.preset:
        cfg = cfg.replace(name=args.preset)
    changes = {k: v for k, v in (("n_trials", args.trials), ("master_seed", args.seed),
                                 ("workers", args.workers)) if v is not None}
    cfg = cfg.replace(**changes)
    files = run_experiment(cfg, args.out)
    for f in files:
        print(os.path.join(args.out, f))


def _calibrate(args):
    rng = np.random.default_rng(args.seed)
    th = calibrate(args.snr, args.target, rng=rng, n_samples=args.samples)
    os.makedirs(args.out, exist_ok=True)
    rows = exceed_curves(snr_dbs=(args.snr,), n_samples=args.samples, seed=args.seed)
    csv_name = write_exceed_csv(os.path.join(args.out, "exceed.csv"), rows)
    result = {"snr_db": args.snr, "target": args.target, "c_u": th.c_u, "c_l": th.c_l,
              "n_samples": args.samples, "seed": args.seed, "curves": csv_name}
    with open(os.path.join(args.out, "thresholds.json"), "w") as fh:
        json.dump(result, fh, indent=2)
    print(f"c_u = {th.c_u:g}, c_l = {th.c_l:g}")


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "run":
            _run(args)
        else:
            _calibrate(args)
    except (ConfigError, Unreachable, ValueError) as exc:
        print(f"beamsim: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"beamsim: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
