"""``shrinksgd`` command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 data error (stream
exhausted), 4 invariant violation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

import numpy as np

from .._rng import make_rng
from ..exceptions import ConfigError, InvariantViolation, StreamExhausted
from ..shrinking_gradient import averaged_hypothesis, load_checkpoint, predict
from ..scalar_estimator import required_test_samples
from .config import ExperimentConfig
from .runner import cmd_compare, cmd_run, cmd_sweep, out_dir_for

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_INVARIANT = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="shrinksgd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_args(p):
        p.add_argument("--config", required=True, help="INI experiment config")
        p.add_argument("--seed", type=int, help="override experiment.seed")
        p.add_argument("--out", help="output directory (else $SHRINKSGD_OUT, else experiment.out)")
        p.add_argument("--workers", type=int, help="override experiment.workers")

    experiment_args(sub.add_parser("run", help="run the configured algorithms"))
    p = sub.add_parser("sweep", help="regret against horizon under the parameter schedule")
    experiment_args(p)
    p.add_argument("--horizons", help="comma-separated horizons, overriding [sweep] horizons")
    experiment_args(sub.add_parser("compare", help="test error against training size"))

    p = sub.add_parser("estimate", help="one-off prediction from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--x", required=True, help="comma-separated query point")
    p.add_argument("--eps0", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--averaged", action="store_true", help="use the averaged hypothesis")
    return parser


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_file(args.config)
    exp = cfg.experiment
    if args.seed is not None:
        exp = dataclasses.replace(exp, seed=args.seed)
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        exp = dataclasses.replace(exp, workers=args.workers)
    out = out_dir_for(cfg, args.out)
    return dataclasses.replace(cfg, experiment=dataclasses.replace(exp, out=out))


def _estimate(args) -> dict:
    try:
        state, _ = load_checkpoint(args.checkpoint)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint: {exc}") from None
    h = averaged_hypothesis(state) if args.averaged else state.hypothesis
    try:
        x = np.array([float(v) for v in args.x.split(",")])
        m = required_test_samples(h.l1(), args.eps0, args.delta)
        value = predict(h, x, args.eps0, args.delta, make_rng(args.seed))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return {"value": value, "m": m, "l1": h.l1(), "t": state.t}


def _print_table(rows: list) -> None:
    if not rows:
        return
    cols = list(rows[0])
    print("\t".join(cols))
    for row in rows:
        print("\t".join(f"{row[c]:.6g}" if isinstance(row[c], float) else str(row[c]) for c in cols))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "estimate":
            print(json.dumps(_estimate(args)))
            return EXIT_OK
        cfg = _load(args)
        out = cfg.experiment.out
        if args.command == "run":
            print(json.dumps(cmd_run(cfg, out), indent=2))
        elif args.command == "sweep":
            horizons = None
            if args.horizons is not None:
                try:
                    horizons = [int(v) for v in args.horizons.split(",") if v.strip()]
                except ValueError:
                    raise ConfigError(f"bad --horizons {args.horizons!r}") from None
            _print_table(cmd_sweep(cfg, out, horizons))
        else:
            _print_table(cmd_compare(cfg, out))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StreamExhausted as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvariantViolation as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
