"""End-to-end orbit counting experiments.

A single streaming pass enumerates the arithmetic subgroup up to the
largest radius of the grid; every element is bucketed by an exact integer
norm threshold into its grid cells and classified against all regions and
basepoints.  The resulting table carries, per (T, region, basepoint),
the count, exact boundary hits, ratio to the whole-space count, the region
measure, the deviation, and the covolume estimate implied by the leading
volume term.
"""

from __future__ import annotations

import hashlib
import io
import json
import math
import platform
from dataclasses import dataclass, field

import numpy as np

from latorbit.boundary import (
    CirclePoint,
    ProjectivePoint,
    Region,
    circle_arcs_exact_ok,
    circle_orbit_pairs,
    circle_regions_form_partition,
    classify_cap_vectors,
    classify_circle_pairs,
    measure_region,
    projective_orbit_vectors,
)
from latorbit.group import MAX_N, MIN_N
from latorbit.haar import gamma_n
from latorbit.lattice import (
    DEFAULT_MAX_ELEMENTS,
    SubgroupSpec,
    iter_element_blocks,
    norm_sq_threshold,
)

ALL_REGION = "ALL"

CSV_HEADER = "T,region,basepoint,count,boundary_hits,ratio,m_omega,deviation,covolume_est"


def _check_name(name: str, what: str) -> None:
    if not name or any(c in name for c in ",\n\r"):
        raise ValueError(f"{what} name {name!r} is empty or contains a comma/newline")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one counting experiment."""

    n: int
    T_grid: tuple[float, ...]
    regions: tuple[tuple[str, Region], ...]
    basepoints: tuple[tuple[str, object], ...]
    subgroup: SubgroupSpec = field(default_factory=SubgroupSpec.full)
    seed: int = 0
    threads: int = 1
    max_elements: int = DEFAULT_MAX_ELEMENTS

    def __post_init__(self) -> None:
        if not (MIN_N <= self.n <= MAX_N):
            raise ValueError(f"n must lie in [{MIN_N}, {MAX_N}], got {self.n}")
        grid = tuple(float(t) for t in self.T_grid)
        if not grid:
            raise ValueError("the radius grid is empty")
        if any(not (math.isfinite(t) and t > 0) for t in grid):
            raise ValueError("radius grid entries must be positive and finite")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError(f"radius grid must be strictly ascending, got {grid}")
        object.__setattr__(self, "T_grid", grid)
        if not self.regions:
            raise ValueError("at least one region is required")
        names = [name for name, _ in self.regions]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate region names in {names}")
        for name, region in self.regions:
            _check_name(name, "region")
            if name == ALL_REGION:
                raise ValueError(f"region name {ALL_REGION!r} is reserved")
            if self.n == 2:
                if region.kind != "circle-arcs":
                    raise ValueError("n = 2 experiments use circle-arcs regions")
            else:
                if region.kind != "projective-caps" or region.dim != self.n:
                    raise ValueError(
                        f"n = {self.n} experiments use projective-caps regions of dimension {self.n}"
                    )
        if not self.basepoints:
            raise ValueError("at least one basepoint is required")
        bnames = [name for name, _ in self.basepoints]
        if len(set(bnames)) != len(bnames):
            raise ValueError(f"duplicate basepoint names in {bnames}")
        for name, point in self.basepoints:
            _check_name(name, "basepoint")
            if self.n == 2:
                if not isinstance(point, CirclePoint):
                    raise ValueError(f"basepoint {name!r} must be a circle point for n = 2")
            else:
                if not isinstance(point, ProjectivePoint) or point.dim != self.n:
                    raise ValueError(
                        f"basepoint {name!r} must be a projective point of dimension {self.n}"
                    )
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.max_elements < 1:
            raise ValueError("max_elements must be >= 1")


def resolved_config_text(config: ExperimentConfig) -> str:
    """Canonical plain-text form of a config, logged with every run and
    hashed into report metadata."""
    lines = [
        f"n = {config.n}",
        f"subgroup = {1 if config.subgroup.kind == 'full' else config.subgroup.q}",
        "T_grid = " + " ".join(repr(t) for t in config.T_grid),
        f"seed = {config.seed}",
        f"threads = {config.threads}",
        f"max_elements = {config.max_elements}",
    ]
    for name, point in config.basepoints:
        lines.append(f"basepoint {name} = {_point_text(point)}")
    for name, region in config.regions:
        lines.append(f"region {name} = {_region_text(region)}")
    return "\n".join(lines) + "\n"


def _point_text(point) -> str:
    if isinstance(point, CirclePoint):
        if point.is_infinite:
            return "inf" if point.value > 0 else "-inf"
        return str(point.value)
    return " ".join(str(int(c)) for c in point.v)


def _endpoint_text(e) -> str:
    if isinstance(e, float):
        return "inf" if e > 0 else "-inf"
    return str(e)


def _region_text(region: Region) -> str:
    if region.kind == "circle-arcs":
        parts = [f"arc {_endpoint_text(a.lo)} {_endpoint_text(a.hi)}" for a in region.arcs]
    else:
        parts = []
        for cap in region.caps:
            axis = " ".join(str(x) for x in cap.axis.tolist())
            if cap.cos_sq is not None:
                parts.append(f"cap axis {axis} cos_sq {cap.cos_sq}")
            else:
                parts.append(f"cap axis {axis} alpha {cap.alpha!r}")
    return "; ".join(parts)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(resolved_config_text(config).encode()).hexdigest()


@dataclass(frozen=True)
class CountRow:
    """One report line; the column order matches the CSV header."""

    T: float
    region: str
    basepoint: str
    count: int
    boundary_hits: int
    ratio: float
    m_omega: float
    deviation: float
    covolume_est: float


@dataclass(frozen=True)
class CountTable:
    """Rows of a counting run.  Equality compares rows only, so a table
    survives a round trip through its CSV form."""

    rows: tuple[CountRow, ...]
    partition: bool = field(default=False, compare=False)
    meta: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        """Monotone counts in T per (region, basepoint); when the regions
        tile the whole space, interior counts plus distinct boundary
        points add up to the total."""
        series: dict[tuple[str, str], list[tuple[float, int]]] = {}
        cells: dict[tuple[float, str], dict[str, CountRow]] = {}
        for row in self.rows:
            series.setdefault((row.region, row.basepoint), []).append((row.T, row.count))
            cells.setdefault((row.T, row.basepoint), {})[row.region] = row
        for key, pts in series.items():
            pts.sort()
            for (t1, c1), (t2, c2) in zip(pts, pts[1:]):
                if c2 < c1:
                    raise ValueError(f"counts for {key} decrease from T={t1} to T={t2}")
        for (T, bp), rows in cells.items():
            if ALL_REGION not in rows:
                raise ValueError(f"missing {ALL_REGION} row for T={T}, basepoint={bp}")
            if self.partition:
                total = rows[ALL_REGION].count
                interior = sum(r.count for name, r in rows.items() if name != ALL_REGION)
                if interior + rows[ALL_REGION].boundary_hits != total:
                    raise ValueError(
                        f"partition identity fails at T={T}, basepoint={bp}: "
                        f"{interior} interior + {rows[ALL_REGION].boundary_hits} boundary != {total}"
                    )

    def total_rows(self, basepoint: str | None = None) -> list[CountRow]:
        """The whole-space rows for one basepoint, ascending in T."""
        if basepoint is None:
            for row in self.rows:
                basepoint = row.basepoint
                break
            else:
                return []
        picked = [r for r in self.rows if r.region == ALL_REGION and r.basepoint == basepoint]
        picked.sort(key=lambda r: r.T)
        return picked

    def basepoint_names(self) -> list[str]:
        seen: list[str] = []
        for row in self.rows:
            if row.basepoint not in seen:
                seen.append(row.basepoint)
        return seen


def _versions() -> dict:
    import numpy
    import scipy

    from latorbit import __version__

    versions = {
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "latorbit": __version__,
    }
    try:
        import numba

        versions["numba"] = numba.__version__
    except ImportError:
        pass
    return versions


def run_count(config: ExperimentConfig) -> CountTable:
    """Stream the enumeration once at the largest radius and tally every
    grid cell, region, and basepoint.  Deterministic for a fixed config."""
    n = config.n
    grid = config.T_grid
    G = len(grid)
    thresholds = np.array([norm_sq_threshold(t) for t in grid], dtype=np.int64)
    B = len(config.basepoints)
    R = len(config.regions)
    total_bins = np.zeros((B, G + 1), dtype=np.int64)
    union_bins = np.zeros((B, G + 1), dtype=np.int64)
    inside_bins = np.zeros((B, R, G + 1), dtype=np.int64)
    bdry_bins = np.zeros((B, R, G + 1), dtype=np.int64)

    for block in iter_element_blocks(
        n,
        grid[-1],
        config.subgroup,
        max_elements=config.max_elements,
        threads=config.threads,
    ):
        nsq = (block * block).sum(axis=1)
        first = np.searchsorted(thresholds, nsq, side="left")
        for b, (bname, bpoint) in enumerate(config.basepoints):
            total_bins[b] += np.bincount(first, minlength=G + 1)
            if n == 2:
                u, v = circle_orbit_pairs(block, bpoint)
                images = (u, v)
            else:
                images = projective_orbit_vectors(block, n, bpoint)
            any_inside = np.zeros(block.shape[0], dtype=bool)
            any_bdry = np.zeros(block.shape[0], dtype=bool)
            for r, (rname, region) in enumerate(config.regions):
                if n == 2:
                    if not circle_arcs_exact_ok(region, *images):
                        raise ValueError(
                            f"exact arc classification unavailable for region {rname!r} "
                            f"with basepoint {bname!r}: endpoint heights too large"
                        )
                    inside, bdry = classify_circle_pairs(region, *images)
                else:
                    inside, bdry = classify_cap_vectors(region, images)
                inside_bins[b, r] += np.bincount(first[inside], minlength=G + 1)
                bdry_bins[b, r] += np.bincount(first[bdry], minlength=G + 1)
                any_inside |= inside
                any_bdry |= bdry
            union_bins[b] += np.bincount(first[any_bdry & ~any_inside], minlength=G + 1)

    measures = [
        measure_region(region, rng=np.random.default_rng(config.seed))
        if region.kind == "projective-caps"
        else measure_region(region)
        for _, region in config.regions
    ]
    total = total_bins[:, :G].cumsum(axis=1)
    union = union_bins[:, :G].cumsum(axis=1)
    inside = inside_bins[:, :, :G].cumsum(axis=2)
    bdry = bdry_bins[:, :, :G].cumsum(axis=2)

    leading = gamma_n(n)
    power = n * n - n
    rows: list[CountRow] = []
    for g, T in enumerate(grid):
        for b, (bname, _) in enumerate(config.basepoints):
            N = int(total[b, g])
            cov = leading * T**power / N if N > 0 else math.inf
            rows.append(
                CountRow(
                    T=T,
                    region=ALL_REGION,
                    basepoint=bname,
                    count=N,
                    boundary_hits=int(union[b, g]),
                    ratio=1.0 if N > 0 else math.nan,
                    m_omega=1.0,
                    deviation=0.0 if N > 0 else math.nan,
                    covolume_est=cov,
                )
            )
            for r, (rname, _) in enumerate(config.regions):
                c = int(inside[b, r, g])
                ratio = c / N if N > 0 else math.nan
                m = measures[r].value
                rows.append(
                    CountRow(
                        T=T,
                        region=rname,
                        basepoint=bname,
                        count=c,
                        boundary_hits=int(bdry[b, r, g]),
                        ratio=ratio,
                        m_omega=m,
                        deviation=abs(ratio - m) if N > 0 else math.nan,
                        covolume_est=cov,
                    )
                )
    table = CountTable(
        rows=tuple(rows),
        partition=circle_regions_form_partition([reg for _, reg in config.regions]),
        meta={
            "config_hash": config_hash(config),
            "seed": config.seed,
            "n": n,
            "versions": _versions(),
        },
    )
    table.validate()
    return table


def fit_exponent(table: CountTable, basepoint: str | None = None) -> tuple[float, float]:
    """Least-squares slope of log total count against log radius, with the
    coefficient of determination."""
    rows = [r for r in table.total_rows(basepoint) if r.count > 0]
    if len(rows) < 3:
        raise ValueError("degenerate grid: need at least 3 radii with nonzero counts")
    x = np.log([r.T for r in rows])
    y = np.log([float(r.count) for r in rows])
    if np.ptp(x) == 0.0:
        raise ValueError("degenerate grid: radii are all equal")
    slope, intercept = np.polyfit(x, y, 1)
    reside = y - (slope * x + intercept)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r_sq = 1.0 if ss_tot == 0.0 else 1.0 - float((reside**2).sum()) / ss_tot
    return float(slope), r_sq


def estimate_covolume(
    table: CountTable, basepoint: str | None = None, n: int | None = None
) -> list[tuple[float, float]]:
    """Per grid radius, the covolume implied by inverting the leading
    volume term against the whole-space count."""
    if n is None:
        n = table.meta.get("n")
        if n is None:
            raise ValueError("dimension unknown: pass n or use a table with meta['n']")
    n = int(n)
    rows = table.total_rows(basepoint)
    if not rows:
        raise ValueError("table has no whole-space rows")
    out = []
    for row in rows:
        if row.count <= 0:
            raise ValueError(f"zero count at T={row.T}; covolume undefined")
        out.append((row.T, gamma_n(n) * row.T ** (n * n - n) / row.count))
    return out


def _float_text(x: float) -> str:
    return repr(float(x))


def emit_report(table: CountTable, out, fmt: str = "csv") -> None:
    """Write the table as CSV (exact column set, reproducible bytes) or as
    JSON with a run-metadata header."""
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be 'csv' or 'json', got {fmt!r}")
    own = isinstance(out, (str, bytes)) or hasattr(out, "__fspath__")
    fh = open(out, "w", encoding="ascii") if own else out
    try:
        if fmt == "csv":
            fh.write(CSV_HEADER + "\n")
            for r in table.rows:
                fh.write(
                    f"{_float_text(r.T)},{r.region},{r.basepoint},{r.count},"
                    f"{r.boundary_hits},{_float_text(r.ratio)},{_float_text(r.m_omega)},"
                    f"{_float_text(r.deviation)},{_float_text(r.covolume_est)}\n"
                )
        else:
            doc = {
                "metadata": table.meta,
                "partition": table.partition,
                "rows": [
                    {
                        "T": r.T,
                        "region": r.region,
                        "basepoint": r.basepoint,
                        "count": r.count,
                        "boundary_hits": r.boundary_hits,
                        "ratio": _nan_safe(r.ratio),
                        "m_omega": r.m_omega,
                        "deviation": _nan_safe(r.deviation),
                        "covolume_est": _nan_safe(r.covolume_est),
                    }
                    for r in table.rows
                ],
            }
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    finally:
        if own:
            fh.close()


def _nan_safe(x: float):
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _nan_restore(x) -> float:
    return float(x)


def parse_report(source, fmt: str | None = None) -> CountTable:
    """Read a report back into a table.  CSV restores the rows; JSON also
    restores metadata and the partition flag."""
    own = isinstance(source, (str, bytes)) or hasattr(source, "__fspath__")
    if own:
        with open(source, "r", encoding="ascii") as fh:
            text = fh.read()
        if fmt is None:
            fmt = "json" if str(source).endswith(".json") else "csv"
    else:
        text = source.read()
    if fmt is None:
        fmt = "json" if text.lstrip().startswith("{") else "csv"
    if fmt == "json":
        doc = json.loads(text)
        rows = tuple(
            CountRow(
                T=float(r["T"]),
                region=r["region"],
                basepoint=r["basepoint"],
                count=int(r["count"]),
                boundary_hits=int(r["boundary_hits"]),
                ratio=_nan_restore(r["ratio"]),
                m_omega=float(r["m_omega"]),
                deviation=_nan_restore(r["deviation"]),
                covolume_est=_nan_restore(r["covolume_est"]),
            )
            for r in doc["rows"]
        )
        return CountTable(rows=rows, partition=bool(doc.get("partition", False)), meta=doc.get("metadata", {}))
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header: {lines[0] if lines else '<empty>'!r}")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != 9:
            raise ValueError(f"malformed CSV row: {ln!r}")
        rows.append(
            CountRow(
                T=float(parts[0]),
                region=parts[1],
                basepoint=parts[2],
                count=int(parts[3]),
                boundary_hits=int(parts[4]),
                ratio=float(parts[5]),
                m_omega=float(parts[6]),
                deviation=float(parts[7]),
                covolume_est=float(parts[8]),
            )
        )
    return CountTable(rows=tuple(rows))


def report_text(table: CountTable, fmt: str = "csv") -> str:
    buf = io.StringIO()
    emit_report(table, buf, fmt)
    return buf.getvalue()
