"""Plain-text configuration for experiments.

Two small formats, both line-oriented key-value text with # comments:

Config file::

    n = 2
    subgroup = 1
    T_grid = 50 100 200 400
    basepoint = 0
    basepoint = inf
    basepoint = 1/3
    region_file = regions.txt
    seed = 7
    threads = 1
    max_elements = 100000000

Region file::

    kind = circle-arcs

    [region HALF]
    arc = -1 1

    [region WRAP]
    arc = 1 -1

    # projective files use kind = projective-caps and stanzas like
    # [region CAP]
    # axis = 1 0 0
    # cos_alpha = 1/2      (exact; or: alpha = 1.0471975511965976)

Command-line flags override file values; every run logs its resolved
config, whose hash lands in report metadata.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from latorbit.boundary import Arc, Cap, CirclePoint, ProjectivePoint, Region
from latorbit.experiments import ExperimentConfig
from latorbit.lattice import DEFAULT_MAX_ELEMENTS, SubgroupSpec


class ConfigError(ValueError):
    """Malformed config or region file, or inconsistent parameters."""


CONFIG_KEYS = {
    "n",
    "subgroup",
    "T_grid",
    "basepoint",
    "region_file",
    "seed",
    "threads",
    "max_elements",
    "format",
    "out",
}

_REPEATABLE = {"basepoint"}


def _lines(text: str):
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield i, line


def parse_config_text(text: str) -> dict:
    """Key-value pairs of a config file; repeatable keys become lists."""
    out: dict = {}
    for i, line in _lines(text):
        if "=" not in line:
            raise ConfigError(f"line {i}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {i}: unknown key {key!r}")
        if key in _REPEATABLE:
            out.setdefault(key, []).append(value)
        elif key in out:
            raise ConfigError(f"line {i}: duplicate key {key!r}")
        else:
            out[key] = value
    return out


def parse_config_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def parse_region_text(text: str) -> tuple[str, list[tuple[str, Region]]]:
    """(kind, named regions) from a region file."""
    kind: str | None = None
    regions: list[tuple[str, Region]] = []
    current_name: str | None = None
    arcs: list[Arc] = []
    caps: list[dict] = []

    def flush(line_no: int) -> None:
        nonlocal arcs, caps
        if current_name is None:
            return
        try:
            if kind == "circle-arcs":
                if not arcs:
                    raise ConfigError(f"region {current_name!r} has no arcs")
                regions.append((current_name, Region.circle_arcs(arcs)))
            else:
                built = []
                for spec in caps:
                    if "axis" not in spec:
                        raise ConfigError(f"region {current_name!r}: cap without axis")
                    if "cos_alpha" in spec:
                        built.append(Cap.from_cos_alpha(spec["axis"], spec["cos_alpha"]))
                    elif "alpha" in spec:
                        built.append(Cap(axis=spec["axis"], alpha=spec["alpha"]))
                    else:
                        raise ConfigError(
                            f"region {current_name!r}: cap needs alpha or cos_alpha"
                        )
                if not built:
                    raise ConfigError(f"region {current_name!r} has no caps")
                regions.append((current_name, Region.projective_caps(built)))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"near line {line_no}: {exc}") from exc
        arcs = []
        caps = []

    for i, line in _lines(text):
        if line.startswith("[") and line.endswith("]"):
            if kind is None:
                raise ConfigError(f"line {i}: kind must be declared before regions")
            flush(i)
            header = line[1:-1].split()
            if len(header) != 2 or header[0] != "region":
                raise ConfigError(f"line {i}: expected '[region NAME]', got {line!r}")
            current_name = header[1]
            continue
        if "=" not in line:
            raise ConfigError(f"line {i}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key == "kind":
            if kind is not None:
                raise ConfigError(f"line {i}: duplicate kind")
            if value not in ("circle-arcs", "projective-caps"):
                raise ConfigError(f"line {i}: unknown region kind {value!r}")
            kind = value
        elif key == "arc":
            if kind != "circle-arcs":
                raise ConfigError(f"line {i}: arc outside a circle-arcs file")
            if current_name is None:
                raise ConfigError(f"line {i}: arc outside a [region ...] stanza")
            parts = value.split()
            if len(parts) != 2:
                raise ConfigError(f"line {i}: arc needs two endpoints, got {value!r}")
            try:
                arcs.append(Arc(_parse_endpoint(parts[0]), _parse_endpoint(parts[1])))
            except ValueError as exc:
                raise ConfigError(f"line {i}: {exc}") from exc
        elif key == "axis":
            if kind != "projective-caps":
                raise ConfigError(f"line {i}: axis outside a projective-caps file")
            if current_name is None:
                raise ConfigError(f"line {i}: axis outside a [region ...] stanza")
            try:
                vec = np.array([int(x) for x in value.split()], dtype=np.int64)
            except ValueError as exc:
                raise ConfigError(f"line {i}: axis must be integers, got {value!r}") from exc
            caps.append({"axis": vec})
        elif key in ("alpha", "cos_alpha"):
            if not caps or "alpha" in caps[-1] or "cos_alpha" in caps[-1]:
                raise ConfigError(f"line {i}: {key} must follow its axis line")
            if key == "alpha":
                try:
                    caps[-1]["alpha"] = float(value)
                except ValueError as exc:
                    raise ConfigError(f"line {i}: bad alpha {value!r}") from exc
            else:
                try:
                    caps[-1]["cos_alpha"] = Fraction(value)
                except (ValueError, ZeroDivisionError) as exc:
                    raise ConfigError(f"line {i}: bad cos_alpha {value!r}") from exc
        else:
            raise ConfigError(f"line {i}: unknown key {key!r}")
    flush(-1)
    if kind is None:
        raise ConfigError("region file does not declare a kind")
    if not regions:
        raise ConfigError("region file defines no regions")
    return kind, regions


def parse_region_file(path) -> tuple[str, list[tuple[str, Region]]]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_region_text(fh.read())


def _parse_endpoint(token: str):
    t = token.strip().lower()
    if t in ("inf", "+inf", "oo"):
        return math.inf
    if t in ("-inf", "-oo"):
        return -math.inf
    try:
        return Fraction(token)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad endpoint {token!r}") from exc


def parse_basepoint(token: str, n: int):
    """A circle point for n=2 (rational, decimal, or inf), a projective
    integer vector otherwise."""
    if n == 2:
        try:
            return CirclePoint(_parse_endpoint(token))
        except ValueError as exc:
            raise ConfigError(f"bad basepoint {token!r}: {exc}") from exc
    parts = token.split()
    if len(parts) != n:
        raise ConfigError(f"basepoint {token!r}: expected {n} integer coordinates")
    try:
        vec = np.array([int(x) for x in parts], dtype=np.int64)
    except ValueError as exc:
        raise ConfigError(f"basepoint {token!r}: coordinates must be integers") from exc
    try:
        return ProjectivePoint(vec)
    except ValueError as exc:
        raise ConfigError(f"bad basepoint {token!r}: {exc}") from exc


def _to_int(value, key: str) -> int:
    try:
        return int(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key} must be an integer, got {value!r}") from exc


def build_experiment_config(
    *,
    config_file=None,
    n: int | None = None,
    T_grid=None,
    subgroup: int | None = None,
    basepoints=None,
    region_file=None,
    regions=None,
    seed: int | None = None,
    threads: int | None = None,
    max_elements: int | None = None,
) -> ExperimentConfig:
    """Merge file values and explicit overrides into a validated config.

    Explicit arguments win over the file; `regions` (a list of named
    Region objects) wins over `region_file`.
    """
    file_vals = parse_config_file(config_file) if config_file is not None else {}

    def pick(arg, key, default=None):
        if arg is not None:
            return arg
        return file_vals.get(key, default)

    n_val = pick(n, "n")
    if n_val is None:
        raise ConfigError("n is required (flag or config file)")
    n_val = _to_int(n_val, "n")

    grid_val = pick(T_grid, "T_grid")
    if grid_val is None:
        raise ConfigError("T_grid is required (flag or config file)")
    if isinstance(grid_val, str):
        grid_val = grid_val.split()
    try:
        grid = tuple(float(t) for t in grid_val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad T_grid {grid_val!r}") from exc

    q = _to_int(pick(subgroup, "subgroup", 1), "subgroup")
    if q < 1:
        raise ConfigError(f"subgroup level must be >= 1, got {q}")

    if regions is None:
        rf = pick(region_file, "region_file")
        if rf is None:
            raise ConfigError("regions are required (region_file or explicit regions)")
        _, regions = parse_region_file(rf)

    bp_tokens = pick(basepoints, "basepoint")
    if not bp_tokens:
        raise ConfigError("at least one basepoint is required")
    if isinstance(bp_tokens, str):
        bp_tokens = [bp_tokens]
    named_points = []
    for tok in bp_tokens:
        if isinstance(tok, tuple):
            named_points.append(tok)
        else:
            named_points.append((tok.strip(), parse_basepoint(tok, n_val)))

    try:
        return ExperimentConfig(
            n=n_val,
            T_grid=grid,
            regions=tuple(regions),
            basepoints=tuple(named_points),
            subgroup=SubgroupSpec.from_modulus(q),
            seed=_to_int(pick(seed, "seed", 0), "seed"),
            threads=_to_int(pick(threads, "threads", 1), "threads"),
            max_elements=_to_int(pick(max_elements, "max_elements", DEFAULT_MAX_ELEMENTS), "max_elements"),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
