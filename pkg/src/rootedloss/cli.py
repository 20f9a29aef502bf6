"""Command-line entry point.

    rootedloss regress --data data/uci/wine.data --out runs/wine
    rootedloss regress --manifest runs/wine/manifest.json --out runs/wine-again

Exit status: 0 on success, 2 on configuration errors, 3 when any grid cell
diverged (results are still written).
"""

import argparse
import logging
import sys

from . import __version__
from .config import (COMMANDS, ConfigError, build_config, parse_values, read_config_file,
                     read_manifest)
from .experiments import emit_results, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

log = logging.getLogger("rootedloss")

# flag -> config key; values arrive as text and go through the config parsers
_FLAGS = [
    ("--data", "data", "CSV path, or 'spiral' / 'madelon' for built-in generators"),
    ("--name", "name", "dataset name used in result rows"),
    ("--label-column", "label_column", "label column index (negative counts from the end)"),
    ("--delimiter", "delimiter", "field delimiter of --data"),
    ("--positive-label", "positive_label", "class name mapped to +1 in two-class files"),
    ("--loss", "loss", "comma list of loss families"),
    ("--k", "k", "root grid, e.g. '3-20' or '3,6,10'"),
    ("--m", "m", "multiplier (default: equal to k)"),
    ("--gamma", "gamma", "focal loss exponent"),
    ("--lambda", "l2_lambda", "L2 strength grid, e.g. '0,1e-3'"),
    ("--lr", "lr", "learning rate"),
    ("--iters", "iters", "iterations (default 200; 1000 for SPECTF)"),
    ("--batch-size", "batch_size", "mini-batch size (default full batch)"),
    ("--folds", "folds", "cross-validation folds"),
    ("--seed", "seed", "seed for splits and data generation"),
    ("--seeds", "seeds", "seed list for repeated network and GAN runs"),
    ("--depths", "depths", "network depths (affine layers)"),
    ("--depth-iters", "depth_iters", "iteration budget per depth"),
    ("--hidden", "hidden", "hidden width"),
    ("--grid-resolution", "grid_resolution", "decision grid points per axis (2-D data)"),
    ("--record-every", "record_every", "trace recording period"),
    ("--weights", "weights", "parameter vector (.npy or one CSV line) for diagnose"),
    ("--rounds", "gan_rounds", "toy GAN alternation rounds"),
    ("--target-mean", "gan_target_mean", "toy GAN target mean per dimension"),
    ("--target-std", "gan_target_std", "toy GAN target std per dimension"),
    ("--spiral-n", "spiral_n", "spiral sample count"),
    ("--noise", "spiral_noise", "spiral noise scale"),
    ("--jobs", "jobs", "worker processes for grid cells"),
    ("--out", "out", "output directory"),
]

_SWITCHES = [
    ("standardize", "z-score features with train-fold statistics"),
    ("fit-intercept", "learn a bias term for linear models"),
    ("one-vs-all", "decompose multiclass data for diagnose"),
]


def build_parser():
    parser = argparse.ArgumentParser(prog="rootedloss", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--manifest", help="rerun the configuration stored in a manifest.json")
        p.add_argument("-v", "--verbose", action="store_true")
        for flag, dest, help_ in _FLAGS:
            p.add_argument(flag, dest=dest, default=None, help=help_)
        for name, help_ in _SWITCHES:
            p.add_argument(f"--{name}", dest=name.replace("-", "_"), default=None,
                           action=argparse.BooleanOptionalAction, help=help_)
    return parser


def config_from_args(args):
    file_values = {}
    if args.manifest:
        file_values.update(read_manifest(args.manifest))
        file_values.pop("command", None)
    if args.config:
        file_values.update(read_config_file(args.config))
    raw = {dest: getattr(args, dest) for _, dest, _ in _FLAGS}
    raw.update({n.replace("-", "_"): getattr(args, n.replace("-", "_")) for n, _ in _SWITCHES})
    overrides = parse_values({k: v for k, v in raw.items() if v is not None})
    return build_config(args.command, file_values, overrides)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        table = run_experiment(cfg)
        out = emit_results(table, cfg)
    except ConfigError as exc:
        print(f"rootedloss: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("wrote %d rows to %s", len(table.rows), out)
    if table.any_diverged:
        print(f"rootedloss: {sum(r.get('status') == 'diverged' for r in table.rows)} "
              f"cell(s) diverged; results written to {out}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
