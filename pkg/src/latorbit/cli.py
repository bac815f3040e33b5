"""Command-line front end.

Subcommands: enumerate (raw element dump), count (the counting
experiment), volume (ball volumes by quadrature), measure (region
measures), ergodic (ball averages on the modular surface), report
(re-render a stored table).  Exit codes: 0 on success, 2 for bad
configuration, 3 when the enumeration budget is exceeded.
"""

from __future__ import annotations

import argparse
import contextlib
import math
import sys

import numpy as np

from latorbit.configio import (
    ConfigError,
    build_experiment_config,
    parse_region_file,
)
from latorbit.lattice import (
    DEFAULT_MAX_ELEMENTS,
    BudgetExceededError,
    SubgroupSpec,
    iter_element_blocks,
)


@contextlib.contextmanager
def _open_out(path):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="ascii") as fh:
            yield fh


def _cmd_enumerate(args) -> int:
    q = args.subgroup if args.subgroup is not None else 1
    if q < 1:
        raise ConfigError(f"subgroup level must be >= 1, got {q}")
    T = max(args.T_grid)
    count = 0
    with _open_out(args.out) as fh:
        for block in iter_element_blocks(
            args.n,
            T,
            SubgroupSpec.from_modulus(q),
            max_elements=args.max_elements,
            threads=args.threads,
        ):
            for row in block:
                fh.write(" ".join(str(int(x)) for x in row) + "\n")
            count += block.shape[0]
    print(f"{count} elements with norm < {T!r}", file=sys.stderr)
    return 0


def _cmd_count(args) -> int:
    config = build_experiment_config(
        config_file=args.config,
        n=args.n,
        T_grid=args.T_grid,
        subgroup=args.subgroup,
        basepoints=args.basepoint,
        region_file=args.region_file,
        seed=args.seed,
        threads=args.threads,
        max_elements=args.max_elements,
    )
    from latorbit.experiments import emit_report, resolved_config_text, run_count

    print("# resolved config", file=sys.stderr)
    for line in resolved_config_text(config).splitlines():
        print(f"# {line}", file=sys.stderr)
    table = run_count(config)
    with _open_out(args.out) as fh:
        emit_report(table, fh, args.format)
    return 0


def _cmd_volume(args) -> int:
    from latorbit.haar import rho_ball_volume

    C = -math.inf if args.cone is None else args.cone
    with _open_out(args.out) as fh:
        fh.write("n,T,C,value,error\n")
        for T in args.T_grid:
            res = rho_ball_volume(args.n, T, C, chirality=args.chirality, epsrel=args.epsrel)
            fh.write(f"{args.n},{T!r},{C!r},{res.value!r},{res.error!r}\n")
    return 0


def _cmd_measure(args) -> int:
    from latorbit.boundary import measure_region

    _, regions = parse_region_file(args.region_file)
    rng = np.random.default_rng(args.seed)
    with _open_out(args.out) as fh:
        fh.write("region,m_omega,error_bound,method\n")
        for name, region in regions:
            if region.kind == "projective-caps":
                mv = measure_region(region, rng=rng, max_samples=args.max_samples)
            else:
                mv = measure_region(region)
            fh.write(f"{name},{mv.value!r},{mv.error_bound!r},{mv.method}\n")
    return 0


def _cmd_ergodic(args) -> int:
    from latorbit.ergodic import (
        TestFunction,
        ergodic_average,
        left_haar_average,
        nu_box_mass,
        nu_integral,
        periodic_basepoint,
    )

    box = args.box if args.box is not None else [-0.5, 0.5, 1.0, 2.0]
    try:
        f = TestFunction(args.function, *box)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if f.kind == "indicator-box":
        nu_value = nu_box_mass(f)
    else:
        nu_value = nu_integral(f, max(args.samples, 10_000), seed=args.seed + 1)[0]
    average = ergodic_average if args.chirality == "right" else left_haar_average
    y = periodic_basepoint()
    with _open_out(args.out) as fh:
        fh.write("T,estimate,std_error,nu_value\n")
        for T in args.T_grid:
            est, err = average(y, f, T, args.samples, seed=args.seed, threads=args.threads)
            fh.write(f"{T!r},{est!r},{err!r},{nu_value!r}\n")
    return 0


def _cmd_report(args) -> int:
    from latorbit.experiments import emit_report, parse_report

    table = parse_report(args.table)
    with _open_out(args.out) as fh:
        emit_report(table, fh, args.format)
    return 0


def _add_common(p: argparse.ArgumentParser, *names) -> None:
    if "n" in names:
        p.add_argument("--n", type=int, help="matrix dimension")
    if "T_grid" in names:
        p.add_argument(
            "--T-grid", dest="T_grid", type=float, nargs="+", help="ascending radii"
        )
    if "subgroup" in names:
        p.add_argument(
            "--subgroup", type=int, help="congruence level q (1 = the full group)"
        )
    if "seed" in names:
        p.add_argument("--seed", type=int, default=None, help="random seed")
    if "threads" in names:
        p.add_argument("--threads", type=int, default=None, help="worker threads")
    if "out" in names:
        p.add_argument("--out", default=None, help="output path (default stdout)")
    if "format" in names:
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    if "max_elements" in names:
        p.add_argument(
            "--max-elements", dest="max_elements", type=int, default=None,
            help="enumeration budget",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latorbit",
        description="Orbit counting and equidistribution experiments for "
        "integer matrix groups.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="dump lattice elements, one per line")
    _add_common(p, "n", "T_grid", "subgroup", "threads", "out", "max_elements")
    p.set_defaults(func=_cmd_enumerate, seed=None)

    p = sub.add_parser("count", help="run a counting experiment and report it")
    _add_common(p, "n", "T_grid", "subgroup", "seed", "threads", "out", "format", "max_elements")
    p.add_argument("--config", default=None, help="config file (flags override)")
    p.add_argument("--region-file", dest="region_file", default=None)
    p.add_argument(
        "--basepoint", action="append", default=None,
        help="boundary basepoint; repeatable",
    )
    p.set_defaults(func=_cmd_count)

    p = sub.add_parser("volume", help="ball volumes by quadrature")
    _add_common(p, "n", "T_grid", "out")
    p.add_argument("--cone", type=float, default=None, help="diagonal floor C")
    p.add_argument("--chirality", choices=("right", "left"), default="right")
    p.add_argument("--epsrel", type=float, default=1e-10)
    p.set_defaults(func=_cmd_volume)

    p = sub.add_parser("measure", help="measures of the regions in a file")
    _add_common(p, "seed", "out")
    p.add_argument("--region-file", dest="region_file", required=True)
    p.add_argument("--max-samples", dest="max_samples", type=int, default=10**6)
    p.set_defaults(func=_cmd_measure)

    p = sub.add_parser("ergodic", help="ball averages on the modular surface")
    _add_common(p, "T_grid", "seed", "threads", "out")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument(
        "--box", type=float, nargs=4, default=None,
        metavar=("RE_MIN", "RE_MAX", "IM_MIN", "IM_MAX"),
        help="test-function box (default -0.5 0.5 1 2)",
    )
    p.add_argument(
        "--function", choices=("indicator-box", "continuous-bump"),
        default="indicator-box",
    )
    p.add_argument("--chirality", choices=("right", "left"), default="right")
    p.set_defaults(func=_cmd_ergodic)

    p = sub.add_parser("report", help="re-render a stored table")
    p.add_argument("table", help="CSV or JSON report to read")
    _add_common(p, "out", "format")
    p.set_defaults(func=_cmd_report)

    return parser


def _normalize(args) -> None:
    if getattr(args, "seed", None) is None:
        args.seed = 0
    if getattr(args, "threads", None) is None:
        args.threads = 1
    if getattr(args, "max_elements", None) is None:
        args.max_elements = DEFAULT_MAX_ELEMENTS


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command in ("enumerate", "volume"):
        if args.n is None or not args.T_grid:
            parser.error(f"{args.command} requires --n and --T-grid")
        if args.command == "enumerate":
            _normalize(args)
    if args.command == "ergodic":
        if not args.T_grid:
            parser.error("ergodic requires --T-grid")
        _normalize(args)
    if args.command == "measure":
        _normalize(args)
    try:
        return args.func(args)
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
