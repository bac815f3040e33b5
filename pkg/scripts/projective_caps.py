#!/usr/bin/env python3
"""Orbit equidistribution in the projective plane for the 3x3 group.

Pushes a rational direction along the orbit of the integer lattice inside
growing norm balls and measures how often the image direction falls in a
symmetric cap about the first coordinate axis.  The normalized cap measure
is 1 - cos(alpha), exactly 1/2 for the default cap, so the hit ratio
should approach one half while the total count grows like T^6.

The default radius of 12 enumerates about 5 * 10^7 elements; expect tens
of seconds of work.

    python3 scripts/projective_caps.py
    python3 scripts/projective_caps.py --T-max 10 --threads 4
"""

import argparse
import sys
from fractions import Fraction

import numpy as np

from latorbit.boundary import Cap, ProjectivePoint, Region
from latorbit.experiments import (
    ExperimentConfig,
    emit_report,
    estimate_covolume,
    fit_exponent,
    run_count,
)


def build_config(T_max: float, threads: int) -> ExperimentConfig:
    grid = tuple(float(t) for t in np.arange(4.0, T_max + 0.5, 2.0))
    cap = Cap.from_cos_alpha(np.array([1, 0, 0]), Fraction(1, 2))
    return ExperimentConfig(
        n=3,
        T_grid=grid,
        regions=(("CAP", Region.projective_caps([cap])),),
        basepoints=(("e1", ProjectivePoint(np.array([1, 0, 0]))),
                    ("e1+e2+e3", ProjectivePoint(np.array([1, 1, 1])))),
        threads=threads,
        max_elements=200_000_000,
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--T-max", type=float, default=12.0,
                        help="largest ball radius (default 12)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--csv", type=str, default=None,
                        help="also write the full count table to this path")
    args = parser.parse_args(argv)

    config = build_config(args.T_max, args.threads)
    table = run_count(config)
    if args.csv:
        emit_report(table, args.csv, fmt="csv")
        print(f"wrote {args.csv}", file=sys.stderr)

    print(f"n=3, radius grid {', '.join(f'{t:g}' for t in config.T_grid)}")
    print()
    print("cap hit ratios (target 1/2):")
    for row in table.rows:
        if row.region == "CAP":
            print(f"  T={row.T:<4g} x0={row.basepoint:<9} hits={row.count:<10d} "
                  f"ratio={row.ratio:.4f}  dev={row.deviation:.4f}")
    print()

    for name in table.basepoint_names():
        slope, r2 = fit_exponent(table, basepoint=name)
        print(f"growth exponent at x0={name}: {slope:.4f} (target 6, R^2={r2:.6f})")
    print()

    print("covolume estimates:")
    for T, est in estimate_covolume(table, basepoint="e1"):
        print(f"  T={T:<4g} estimate={est:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
