#!/usr/bin/env python3
import sys
import logging
import argparse
from pathlib import Path

from delone_ids.Experiment.experiment import ConfigError, Experiment_Runner, ExperimentConfig
from delone_ids.Spectral.spectra import EigensolverError
from delone_ids.Utilities.log_formatter import setup_logger

COMMANDS = {
    "generate": "Generate a point set (optionally decorated) and write it to points.txt.",
    "decorate": "Decorate the point set read from --in and write decorated.txt.",
    "spectrum": "Write the eigenvalues and the matrix of the operator for every window.",
    "ids": "Write the counting function of every window and the convergence table.",
    "jumps": "Write the eigenvalue clusters above the weight floor for every window.",
    "verify": "Check jump, compact eigenfunction and jump bound at every energy; exit 1 on failure.",
}


def decoration_scale(text):
    """`r=0.42` or `0.42`; an empty value keeps the configured scale."""
    if text == "":
        return None
    value = text.split("=", 1)[1] if "=" in text else text
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"Invalid decoration scale '{text}'.") from None


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    source = common.add_mutually_exclusive_group()
    source.add_argument('--lattice', choices=['square', 'triangular'], default=None,
        help="Periodic lattice to generate.")
    source.add_argument('--cutproject', choices=['ab'], default=None,
        help="Cut-and-project set to generate (ab: octagonal Ammann-Beenker vertices).")
    common.add_argument('--L', nargs='+', type=float, default=None,
        help="Half widths of the cubic windows [-L, L]^d.")
    common.add_argument('--decorate', nargs='?', const='', default=None,
        help="Decorate the set, optionally at scale r (e.g. r=0.42).")
    common.add_argument('--rule', choices=['nn', 'decorated', 'auto'], default=None,
        help="Operator rule.")
    common.add_argument('--hopping', choices=['adjacency', 'laplacian'], default=None,
        help="Plain adjacency or degree-subtracting Laplacian.")
    common.add_argument('--E', nargs='+', type=float, default=None,
        help="Target energies for verify.")
    common.add_argument('--seed', type=int, default=None,
        help="Seed for the quasilattice offset and all sampling.")
    common.add_argument('--out', default=None,
        help="Directory where results (and logs) are written.")
    common.add_argument('--tol-cluster', dest='tol_cluster', type=float, default=None,
        help="Absolute eigenvalue clustering tolerance (default: relative to the spectral radius).")
    common.add_argument('--weight-floor', dest='weight_floor', type=float, default=None,
        help="Smallest cluster weight reported as a jump.")
    common.add_argument('--config', default=None,
        help="YAML configuration file.")
    common.add_argument('--in', dest='point_file', default=None,
        help="Point-set file to read.")
    common.add_argument('--debug', action='store_true',
        help="Flag to enable debug messages.")

    parser = argparse.ArgumentParser(prog="delone-ids",
        description="Integrated density of states of finite-range operators on Delone sets.")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, description in COMMANDS.items():
        subparsers.add_parser(name, parents=[common], help=description, description=description)
    return parser


def overrides(args):
    values = {
        "L": args.L,
        "rule": args.rule,
        "hopping": args.hopping,
        "E": args.E,
        "seed": args.seed,
        "out": args.out,
        "tol_cluster": args.tol_cluster,
        "weight_floor": args.weight_floor,
    }
    if args.lattice is not None:
        values["generator"] = args.lattice
    if args.cutproject is not None:
        values["generator"] = "cutproject"
    if args.point_file is not None:
        values["point_file"] = args.point_file
        if args.command != "decorate" and args.lattice is None and args.cutproject is None:
            values["generator"] = "file"
    if args.decorate is not None:
        values["decorate"] = True
        values["decoration_scale"] = decoration_scale(args.decorate)
    return {key: value for key, value in values.items() if value is not None}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    log_dir = Path(args.out) / "logs" if args.out else "logs"
    setup_logger("delone_ids", level=logging.DEBUG if args.debug else logging.INFO, log_dir=log_dir)

    try:
        config = ExperimentConfig.load(args.config).override(**overrides(args)).validate()
        logging.info(f"Running '{args.command}' with {config}")
        return Experiment_Runner(config).run(args.command)
    except ConfigError as e:
        logging.error(f"Configuration error: {e}")
        return 2
    except EigensolverError as e:
        logging.critical(f"Eigensolver failure: {e}")
        raise
    except ValueError as e:
        logging.error(f"Invalid input: {e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
