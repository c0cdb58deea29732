"""Command line entry point: ``osumcs simulate`` and ``osumcs realdata``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .estimator import Method
from .glm import GlmFamily
from .harness import (
    AUGMENT_MODES,
    FULL_SCALE_GRID,
    FULL_SCALE_N,
    ConfigError,
    CsvFormatError,
    ExperimentConfig,
    emit_results,
    real_data_mode,
    run_sweep,
)
from .scenarios import DESIGNS

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _methods(text: str) -> tuple[Method, ...]:
    try:
        return tuple(Method(v.strip().lower()) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"methods must be drawn from {', '.join(m.value for m in Method)}"
        ) from None


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--methods", type=_methods, default=(Method.OSUMCS, Method.OSUMC, Method.UNIFORM))
    p.add_argument("--n-grid", type=_int_list, default=None)
    p.add_argument("--n0", type=int, default=500)
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument(
        "--augment",
        choices=AUGMENT_MODES,
        default="on",
        help="apply the surrogate augmentation to all methods (on), none (off) or only OSUMCS",
    )
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="osumcs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="Monte-Carlo comparison on a simulated design")
    sim.add_argument("--scenario", required=True, choices=list(DESIGNS))
    sim.add_argument("--family", choices=[f.value for f in GlmFamily], default=None)
    sim.add_argument("--N", type=int, default=None)
    sim.add_argument(
        "--full-scale",
        action="store_true",
        help=f"N={FULL_SCALE_N}, n from 1000 to 2000 by 100, 100 reps for linear designs",
    )
    _common(sim)

    real = sub.add_parser("realdata", help="repeated subsampling on a CSV data set")
    real.add_argument("--csv", required=True)
    real.add_argument("--train-size", type=int, default=19000)
    real.add_argument("--response", default=None, help="response column name (default: last column)")
    real.add_argument("--no-intercept", action="store_true")
    _common(real)
    return parser


def config_from_args(args) -> ExperimentConfig:
    common = dict(
        methods=args.methods,
        n0=args.n0,
        seed=args.seed,
        augment=args.augment,
        workers=args.workers,
    )
    if args.command == "simulate":
        family = GlmFamily(args.family) if args.family else DESIGNS[args.scenario][0]
        if args.full_scale:
            N = args.N or FULL_SCALE_N
            grid = args.n_grid or FULL_SCALE_GRID
            reps = args.reps or (100 if family is GlmFamily.LINEAR else 50)
        else:
            N = args.N or 20000
            grid = args.n_grid or (1000, 1500, 2000)
            reps = args.reps or 50
        return ExperimentConfig(
            scenario=args.scenario,
            family=GlmFamily(args.family) if args.family else None,
            N=N,
            n_grid=grid,
            reps=reps,
            **common,
        )
    return ExperimentConfig(
        csv_path=args.csv,
        train_size=args.train_size,
        response=args.response,
        intercept=not args.no_intercept,
        n_grid=args.n_grid or (1000, 1500, 2000),
        reps=args.reps or 100,
        **common,
    )


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(
            level=logging.INFO if args.verbose else logging.WARNING,
            format="%(levelname)s %(name)s: %(message)s",
        )
        config = config_from_args(args)
        if args.command == "simulate":
            config.validate()
    except ConfigError as exc:
        print(f"osumcs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        rows = run_sweep(config) if args.command == "simulate" else real_data_mode(config)
        emit_results(rows, args.format, args.out)
    except (ConfigError, CsvFormatError) as exc:
        print(f"osumcs: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure past validation is a runtime error
        print(f"osumcs: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
