"""Boundary spaces the matrix groups act on: the circle seen as the real
line plus a point at infinity (n = 2, fractional-linear action), and the
projective space of lines in R^n (n >= 3).

Regions are finite unions of open arcs, or of symmetric caps around an
axis.  Arc endpoints are kept as exact rationals so that orbit points with
integer homogeneous coordinates can be classified with pure integer
arithmetic; a point falling exactly on an endpoint is "boundary", counts
as outside, and is tallied separately by the counting pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from latorbit.group import GroupElement

Endpoint = Union[Fraction, float]  # Fraction, or +-math.inf

# exact integer classification is used only while the cross products below
# stay well inside int64; beyond that the float path takes over
_EXACT_DEN_CAP = 10**6
_EXACT_PAIR_CAP = 10**12
_FLOAT_BAND = 1e-12


class SampleBudgetError(RuntimeError):
    """Requested Monte Carlo accuracy unreachable within the sample budget."""


def _to_endpoint(v) -> Endpoint:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, str):
        s = v.strip()
        if s in ("inf", "+inf", "oo"):
            return math.inf
        if s == "-inf":
            return -math.inf
        return Fraction(s)
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, float):
        if math.isinf(v):
            return v
        if not math.isfinite(v):
            raise ValueError("nan is not a valid endpoint")
        return Fraction(v)  # exact binary value
    raise TypeError(f"cannot interpret {v!r} as a circle point")


@dataclass(frozen=True)
class CirclePoint:
    """A point of the boundary circle: a real number or infinity.

    The exact rational value is kept when available so membership against
    rational arc endpoints can be decided without rounding.
    """

    value: Endpoint

    def __post_init__(self) -> None:
        object.__setattr__(self, "value", _to_endpoint(self.value))

    @property
    def is_infinite(self) -> bool:
        return isinstance(self.value, float) and math.isinf(self.value)

    def as_pair(self) -> tuple[int, int]:
        """Homogeneous integer coordinates (p, q), q >= 0, for exact work."""
        if self.is_infinite:
            return (1, 0)
        f = self.value
        return (f.numerator, f.denominator)

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Arc:
    """Open arc of the circle.

    lo < hi is the plain interval (lo, hi); finite lo > hi is the arc
    running through infinity, {x > lo} + {inf} + {x < hi}.  Arcs with an
    infinite endpoint, like (a, inf), do not contain the point at
    infinity; it is one of their boundary points.
    """

    lo: Endpoint
    hi: Endpoint

    def __post_init__(self) -> None:
        lo = _to_endpoint(self.lo)
        hi = _to_endpoint(self.hi)
        if lo == hi:
            raise ValueError(f"degenerate arc endpoints {lo!r}, {hi!r}")
        if lo == math.inf or hi == -math.inf:
            raise ValueError("use the wrap form (lo > hi, both finite) for arcs through infinity")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def wraps(self) -> bool:
        return not isinstance(self.lo, float) and not isinstance(self.hi, float) and self.lo > self.hi

    def mass(self) -> float:
        """Length under the Cauchy boundary measure of total mass one."""
        at_lo = math.atan(float(self.lo))
        at_hi = math.atan(float(self.hi))
        if self.wraps:
            return 1.0 - (at_lo - at_hi) / math.pi
        return (at_hi - at_lo) / math.pi

    def pieces(self) -> list[tuple[Endpoint, Endpoint]]:
        """Decomposition into plain intervals of the extended line (the
        wrap arc splits at infinity)."""
        if self.wraps:
            return [(self.lo, math.inf), (-math.inf, self.hi)]
        return [(self.lo, self.hi)]


@dataclass(frozen=True)
class Cap:
    """Symmetric cap in projective space: lines within half-angle alpha of
    the axis, i.e. |<v, axis>| > cos(alpha) * |v| * |axis|.

    When the axis is integral and cos(alpha)^2 rational, membership of
    integer vectors is decided exactly.
    """

    axis: np.ndarray
    alpha: float
    cos_sq: Fraction | None = None

    def __post_init__(self) -> None:
        ax = np.asarray(self.axis)
        if ax.ndim != 1 or ax.shape[0] < 2:
            raise ValueError(f"axis must be a vector of dimension >= 2, got shape {ax.shape}")
        if not np.any(ax != 0):
            raise ValueError("axis must be nonzero")
        if np.issubdtype(ax.dtype, np.integer):
            ax = ax.astype(np.int64)
        else:
            ax = ax.astype(float)
            if not np.all(np.isfinite(ax)):
                raise ValueError("axis entries must be finite")
        ax.flags.writeable = False
        object.__setattr__(self, "axis", ax)
        if not (0.0 < self.alpha < math.pi / 2):
            raise ValueError(f"half-angle must lie in (0, pi/2), got {self.alpha}")
        if self.cos_sq is not None:
            cs = Fraction(self.cos_sq)
            if not (0 < cs < 1):
                raise ValueError(f"cos(alpha)^2 must lie in (0, 1), got {cs}")
            object.__setattr__(self, "cos_sq", cs)

    @classmethod
    def from_cos_alpha(cls, axis, cos_alpha) -> "Cap":
        """Exact constructor: cos(alpha) given as a rational number."""
        c = Fraction(cos_alpha)
        if not (0 < c < 1):
            raise ValueError(f"cos(alpha) must lie in (0, 1), got {c}")
        return cls(axis=np.asarray(axis), alpha=math.acos(float(c)), cos_sq=c * c)

    @property
    def dim(self) -> int:
        return self.axis.shape[0]

    @property
    def exact(self) -> bool:
        return self.cos_sq is not None and np.issubdtype(self.axis.dtype, np.integer)


@dataclass(frozen=True)
class ProjectivePoint:
    """A line through the origin, stored as a canonical direction vector:
    unit norm (or primitive integer) with first nonzero coordinate > 0."""

    v: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.v)
        if v.ndim != 1 or v.shape[0] < 2:
            raise ValueError(f"expected a vector of dimension >= 2, got shape {v.shape}")
        if not np.any(v != 0):
            raise ValueError("zero vector does not define a projective point")
        if np.issubdtype(v.dtype, np.integer):
            v = v.astype(np.int64)
            g = int(np.gcd.reduce(np.abs(v)))
            v = v // g
        else:
            v = v.astype(float)
            if not np.all(np.isfinite(v)):
                raise ValueError("entries must be finite")
            v = v / math.sqrt(float((v * v).sum()))
        lead = v[np.nonzero(v)[0][0]]
        if lead < 0:
            v = -v
        v.flags.writeable = False
        object.__setattr__(self, "v", v)

    @property
    def dim(self) -> int:
        return self.v.shape[0]


@dataclass(frozen=True)
class Region:
    """A finite disjoint union of arcs (kind "circle-arcs") or of caps
    (kind "projective-caps")."""

    kind: str
    arcs: tuple[Arc, ...] = ()
    caps: tuple[Cap, ...] = ()

    def __post_init__(self) -> None:
        if self.kind == "circle-arcs":
            if not self.arcs or self.caps:
                raise ValueError("circle-arcs region needs arcs and no caps")
            _check_arcs_disjoint(self.arcs)
        elif self.kind == "projective-caps":
            if not self.caps or self.arcs:
                raise ValueError("projective-caps region needs caps and no arcs")
            dims = {c.dim for c in self.caps}
            if len(dims) != 1:
                raise ValueError(f"caps live in different dimensions: {sorted(dims)}")
            _check_caps_disjoint(self.caps)
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")

    @classmethod
    def circle_arcs(cls, arcs) -> "Region":
        return cls(kind="circle-arcs", arcs=tuple(a if isinstance(a, Arc) else Arc(*a) for a in arcs))

    @classmethod
    def projective_caps(cls, caps) -> "Region":
        return cls(kind="projective-caps", caps=tuple(caps))

    @property
    def dim(self) -> int | None:
        if self.kind == "projective-caps":
            return self.caps[0].dim
        return None


def _pieces_overlap(p1, p2) -> bool:
    lo1, hi1 = p1
    lo2, hi2 = p2
    return lo1 < hi2 and lo2 < hi1


def _check_arcs_disjoint(arcs: tuple[Arc, ...]) -> None:
    pieces = []
    wrap_count = 0
    for a in arcs:
        if a.wraps:
            wrap_count += 1
            if wrap_count > 1:
                raise ValueError("two arcs both run through infinity")
        pieces.extend((piece, a) for piece in a.pieces())
    for i in range(len(pieces)):
        for j in range(i + 1, len(pieces)):
            if pieces[i][1] is pieces[j][1]:
                continue
            if _pieces_overlap(pieces[i][0], pieces[j][0]):
                raise ValueError(f"arcs overlap: {pieces[i][1]} and {pieces[j][1]}")


def _axis_angle(c1: Cap, c2: Cap) -> float:
    a1 = c1.axis.astype(float)
    a2 = c2.axis.astype(float)
    cosv = abs(float(np.dot(a1, a2))) / (
        math.sqrt(float(np.dot(a1, a1))) * math.sqrt(float(np.dot(a2, a2)))
    )
    return math.acos(min(1.0, cosv))


def _check_caps_disjoint(caps: tuple[Cap, ...]) -> None:
    for i in range(len(caps)):
        for j in range(i + 1, len(caps)):
            if _axis_angle(caps[i], caps[j]) <= caps[i].alpha + caps[j].alpha:
                raise ValueError(f"caps overlap: axes too close for the half-angles")


# ---------------------------------------------------------------------------
# group actions


def _as_matrix(g) -> np.ndarray:
    if isinstance(g, GroupElement):
        return g.mat
    return np.asarray(g, dtype=float)


def act_circle(g, x) -> CirclePoint:
    """Fractional-linear action (a x + b) / (c x + d) on the circle,
    sending poles to infinity.  Exact when g is integral and x rational."""
    m = _as_matrix(g)
    if m.shape != (2, 2):
        raise ValueError(f"circle action needs a 2x2 matrix, got {m.shape}")
    pt = x if isinstance(x, CirclePoint) else CirclePoint(x)
    if np.all(m == np.round(m)):
        a, b, c, d = (int(v) for v in np.round(m).reshape(-1))
        p, q = pt.as_pair()
        num = a * p + b * q
        den = c * p + d * q
        if den == 0:
            return CirclePoint(math.inf)
        return CirclePoint(Fraction(num, den))
    a, b, c, d = (float(v) for v in m.reshape(-1))
    if pt.is_infinite:
        return CirclePoint(math.inf) if c == 0.0 else CirclePoint(Fraction(a / c))
    xv = float(pt.value)
    den = c * xv + d
    if den == 0.0:
        return CirclePoint(math.inf)
    return CirclePoint(Fraction((a * xv + b) / den))


def act_projective(g, p: ProjectivePoint) -> ProjectivePoint:
    """Image line of p under g, re-canonicalised."""
    m = g.mat if isinstance(g, GroupElement) else np.asarray(g)
    if m.shape[0] != m.shape[1] or m.shape[0] != p.dim:
        raise ValueError(f"matrix shape {m.shape} does not act on dimension {p.dim}")
    if np.issubdtype(m.dtype, np.integer) and np.issubdtype(p.v.dtype, np.integer):
        return ProjectivePoint(m.astype(np.int64) @ p.v)
    return ProjectivePoint(_as_matrix(m) @ p.v.astype(float))


# ---------------------------------------------------------------------------
# scalar membership


def classify_point(region: Region, point) -> str:
    """'inside', 'boundary', or 'outside'.  Boundary means the point sits
    exactly on an arc endpoint or cap rim (to working precision for
    non-exact data)."""
    if region.kind == "circle-arcs":
        pt = point if isinstance(point, CirclePoint) else CirclePoint(point)
        return _classify_circle_scalar(region, pt)
    if not isinstance(point, ProjectivePoint):
        point = ProjectivePoint(np.asarray(point))
    return _classify_cap_scalar(region, point)


def contains(region: Region, point) -> bool:
    return classify_point(region, point) == "inside"


def _classify_circle_scalar(region: Region, pt: CirclePoint) -> str:
    if pt.is_infinite:
        for a in region.arcs:
            if a.wraps:
                return "inside"
            if isinstance(a.lo, float) or isinstance(a.hi, float):
                return "boundary"
        return "outside"
    x = pt.value
    on_boundary = False
    for a in region.arcs:
        if a.wraps:
            if x > a.lo or x < a.hi:
                return "inside"
            if x == a.lo or x == a.hi:
                on_boundary = True
            continue
        lo_ok = (a.lo == -math.inf) or x > a.lo
        hi_ok = (a.hi == math.inf) or x < a.hi
        if lo_ok and hi_ok:
            return "inside"
        if x == a.lo or x == a.hi:
            on_boundary = True
    return "boundary" if on_boundary else "outside"


def _classify_cap_scalar(region: Region, p: ProjectivePoint) -> str:
    on_boundary = False
    for cap in region.caps:
        if cap.dim != p.dim:
            raise ValueError("dimension mismatch between cap and point")
        if cap.exact and np.issubdtype(p.v.dtype, np.integer):
            dot = int(np.dot(cap.axis, p.v))
            vv = int(np.dot(p.v, p.v))
            aa = int(np.dot(cap.axis, cap.axis))
            lhs = dot * dot * cap.cos_sq.denominator
            rhs = cap.cos_sq.numerator * vv * aa
            if lhs > rhs:
                return "inside"
            if lhs == rhs:
                on_boundary = True
        else:
            av = cap.axis.astype(float)
            pv = p.v.astype(float)
            c2 = float(np.dot(av, pv)) ** 2 / (float(np.dot(av, av)) * float(np.dot(pv, pv)))
            target = float(cap.cos_sq) if cap.cos_sq is not None else math.cos(cap.alpha) ** 2
            if abs(c2 - target) <= _FLOAT_BAND:
                on_boundary = True
            elif c2 > target:
                return "inside"
    return "boundary" if on_boundary else "outside"


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class MeasureValue:
    """A measure of a region together with a numerical error bound
    (zero for closed forms)."""

    value: float
    error_bound: float
    method: str = "closed-form"

    def __post_init__(self) -> None:
        if not (-1e-12 <= self.value <= 1.0 + 1e-12):
            raise ValueError(f"measure {self.value!r} outside [0, 1]")
        if self.error_bound < 0:
            raise ValueError("error bound must be >= 0")
        object.__setattr__(self, "value", min(1.0, max(0.0, self.value)))


def measure_circle(region: Region) -> MeasureValue:
    """Mass of an arc region under the normalised boundary measure
    (density 1 / (pi (1 + x^2)) on the line)."""
    if region.kind != "circle-arcs":
        raise ValueError("measure_circle needs a circle-arcs region")
    total = sum(a.mass() for a in region.arcs)
    return MeasureValue(value=total, error_bound=0.0)


def _cap_fraction_exact_n3(cap: Cap) -> float:
    # rotation-invariant measure of a cap in the projective plane
    return 1.0 - math.cos(cap.alpha)


def sphere_uniform(n: int, size: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform points on the unit sphere in R^n."""
    z = rng.standard_normal((size, n))
    z /= np.sqrt((z * z).sum(axis=1))[:, np.newaxis]
    return z


def measure_caps(
    region: Region,
    *,
    rng: np.random.Generator | None = None,
    max_samples: int = 10**6,
    target_error: float | None = None,
    force_mc: bool = False,
) -> MeasureValue:
    """Measure of a cap region under the rotation-invariant probability
    measure on projective space.

    Dimension 3 has the closed form 1 - cos(alpha) per cap; other
    dimensions (or force_mc) use sphere sampling with a reported 3-sigma
    error bound.  Raises SampleBudgetError when target_error cannot be
    met within max_samples.
    """
    if region.kind != "projective-caps":
        raise ValueError("measure_caps needs a projective-caps region")
    n = region.dim
    if n == 3 and not force_mc:
        return MeasureValue(value=sum(_cap_fraction_exact_n3(c) for c in region.caps), error_bound=0.0)
    if rng is None:
        rng = np.random.default_rng(0)
    axes = [c.axis.astype(float) / math.sqrt(float(np.dot(c.axis, c.axis))) for c in region.caps]
    cos_t = [math.cos(c.alpha) for c in region.caps]
    hits = 0
    total = 0
    chunk = 1 << 16
    while True:
        u = sphere_uniform(n, chunk, rng)
        member = np.zeros(chunk, dtype=bool)
        for ax, ct in zip(axes, cos_t):
            member |= np.abs(u @ ax) > ct
        hits += int(member.sum())
        total += chunk
        p = hits / total
        err = 3.0 * math.sqrt(max(p * (1.0 - p), 1.0 / total) / total)
        if target_error is not None and err <= target_error:
            break
        if total >= max_samples:
            if target_error is not None and err > target_error:
                raise SampleBudgetError(
                    f"3-sigma bound {err:.2e} > target {target_error:.2e} "
                    f"after {total} samples"
                )
            break
    return MeasureValue(value=p, error_bound=err, method="monte-carlo")


def measure_region(region: Region, **kwargs) -> MeasureValue:
    """Dispatch on the region kind."""
    if region.kind == "circle-arcs":
        return measure_circle(region)
    return measure_caps(region, **kwargs)


# ---------------------------------------------------------------------------
# vectorised classification of orbit images (counting pipeline)


def circle_orbit_pairs(block: np.ndarray, basepoint: CirclePoint) -> tuple[np.ndarray, np.ndarray]:
    """Homogeneous integer images (U, V) of the basepoint under a block of
    flattened 2x2 integer matrices, sign-normalised to V > 0, or V == 0
    with U > 0 for infinity."""
    p, q = basepoint.as_pair()
    u = block[:, 0] * p + block[:, 1] * q
    v = block[:, 2] * p + block[:, 3] * q
    flip = (v < 0) | ((v == 0) & (u < 0))
    u = np.where(flip, -u, u)
    v = np.where(flip, -v, v)
    return u, v


def _endpoint_pair(e: Endpoint) -> tuple[int, int]:
    if isinstance(e, float):
        return (1, 0) if e > 0 else (-1, 0)
    return (e.numerator, e.denominator)


def circle_arcs_exact_ok(region: Region, u: np.ndarray, v: np.ndarray) -> bool:
    den_ok = all(
        abs(p) <= _EXACT_DEN_CAP and q <= _EXACT_DEN_CAP
        for a in region.arcs
        for p, q in (_endpoint_pair(a.lo), _endpoint_pair(a.hi))
    )
    if not den_ok:
        return False
    if u.size == 0:
        return True
    mx = max(int(np.abs(u).max()), int(np.abs(v).max()))
    return mx <= _EXACT_PAIR_CAP


def classify_circle_pairs(
    region: Region, u: np.ndarray, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(inside, boundary) masks for sign-normalised homogeneous pairs.

    Exact integer comparisons; the caller should check
    circle_arcs_exact_ok first (the counting pipeline guarantees it for
    rational basepoints and endpoints of modest height).
    """
    inside = np.zeros(u.shape[0], dtype=bool)
    boundary = np.zeros(u.shape[0], dtype=bool)
    at_inf = v == 0
    for a in region.arcs:
        plo, qlo = _endpoint_pair(a.lo)
        phi, qhi = _endpoint_pair(a.hi)
        # cross-multiplied comparisons x ? lo and x ? hi, valid for v > 0
        lo_diff = u * qlo - plo * v
        hi_diff = u * qhi - phi * v
        if a.wraps:
            arc_in = (lo_diff > 0) | (hi_diff < 0)
            arc_bd = (lo_diff == 0) | (hi_diff == 0)
            inside |= np.where(at_inf, True, arc_in)
            boundary |= np.where(at_inf, False, arc_bd)
        else:
            lo_inf = isinstance(a.lo, float)  # -inf
            hi_inf = isinstance(a.hi, float)  # +inf
            lo_ok = np.ones_like(inside) if lo_inf else lo_diff > 0
            hi_ok = np.ones_like(inside) if hi_inf else hi_diff < 0
            arc_in = lo_ok & hi_ok & ~at_inf
            arc_bd = np.zeros_like(boundary)
            if not lo_inf:
                arc_bd |= lo_diff == 0
            if not hi_inf:
                arc_bd |= hi_diff == 0
            arc_bd &= ~at_inf
            if lo_inf or hi_inf:
                arc_bd |= at_inf  # infinity is an endpoint of this arc
            inside |= arc_in
            boundary |= arc_bd
    boundary &= ~inside
    return inside, boundary


def projective_orbit_vectors(block: np.ndarray, n: int, basepoint: ProjectivePoint) -> np.ndarray:
    """Integer image vectors of an integral basepoint under flattened
    integer matrices (no canonicalisation; cap tests are sign-blind)."""
    mats = block.reshape(-1, n, n)
    return mats @ basepoint.v


def classify_cap_vectors(region: Region, w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(inside, boundary) masks for integer image vectors against exact
    caps; falls back to floats with a tolerance band otherwise."""
    m = w.shape[0]
    inside = np.zeros(m, dtype=bool)
    boundary = np.zeros(m, dtype=bool)
    vv = (w * w).sum(axis=1)
    for cap in region.caps:
        if cap.exact and np.issubdtype(w.dtype, np.integer):
            aa = int(np.dot(cap.axis, cap.axis))
            dot = w @ cap.axis
            lhs = dot * dot * cap.cos_sq.denominator
            rhs = (cap.cos_sq.numerator * aa) * vv
            inside |= lhs > rhs
            boundary |= lhs == rhs
        else:
            av = cap.axis.astype(float)
            av /= math.sqrt(float(np.dot(av, av)))
            dotf = (w.astype(float) @ av) ** 2 / vv.astype(float)
            target = float(cap.cos_sq) if cap.cos_sq is not None else math.cos(cap.alpha) ** 2
            band = np.abs(dotf - target) <= _FLOAT_BAND
            inside |= (dotf > target) & ~band
            boundary |= band
    boundary &= ~inside
    return inside, boundary


# ---------------------------------------------------------------------------
# exact partition detection (for count-table identities)


def circle_regions_form_partition(regions: list[Region]) -> bool:
    """True when the arcs of the given regions tile the circle exactly:
    pairwise disjoint with endpoints chaining around, including through
    infinity.  Used to decide when the partition identity of a count
    table must hold."""
    arcs: list[Arc] = []
    for r in regions:
        if r.kind != "circle-arcs":
            return False
        arcs.extend(r.arcs)
    try:
        _check_arcs_disjoint(tuple(arcs))
    except ValueError:
        return False
    # walk the finite endpoints in order; the tiling must alternate
    # arc-boundary-arc with no gaps
    events = []
    for a in arcs:
        for lo, hi in a.pieces():
            events.append((lo, hi))
    events.sort(key=lambda piece: (float(piece[0]), float(piece[1])))
    # exactly one piece must start at -inf and one must end at +inf
    if not events:
        return False
    if events[0][0] != -math.inf or events[-1][1] != math.inf:
        return False
    for (lo1, hi1), (lo2, hi2) in zip(events, events[1:]):
        if hi1 != lo2:
            return False
    return True
