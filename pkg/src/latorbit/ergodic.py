"""Monte Carlo averages of test functions over norm balls in the
upper-triangular group, evaluated on the modular surface.

A 2x2 unimodular matrix acts on the upper half plane by fractional linear
maps; the quotient by the integer subgroup is represented by the standard
fundamental domain {|Re z| <= 1/2, |z| >= 1}.  Averages of a compactly
supported function over right-invariant balls converge to its integral
against the normalized hyperbolic area, while the same averages under the
left-invariant measure collapse at basepoints with a periodic horocycle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from latorbit.group import GroupElement
from latorbit.haar import HaarBallSampler

REDUCTION_CAP = 10_000
FD_TOL = 1e-9

# hyperbolic area of the fundamental domain, the normalizing constant of nu
FD_AREA = math.pi / 3.0


class ReductionError(RuntimeError):
    """Raised when the fundamental-domain reduction fails to terminate."""


def mobius(matrix: np.ndarray, z: complex) -> complex:
    """Fractional linear action of a real 2x2 matrix with positive det."""
    a, b = matrix[0]
    c, d = matrix[1]
    return (a * z + b) / (c * z + d)


def reduce_modular_word(z: complex) -> tuple[complex, np.ndarray, int]:
    """Reduce z into the standard fundamental domain.

    Returns (z_reduced, gamma, word_length) with gamma an exact integer
    unimodular matrix satisfying gamma . z = z_reduced, and word_length the
    number of elementary moves (translations and inversions) applied.
    """
    if not (np.imag(z) > 0):
        raise ValueError(f"point must lie in the upper half plane, got {z!r}")
    z = complex(z)
    gamma = np.eye(2, dtype=np.int64)
    length = 0
    for _ in range(REDUCTION_CAP):
        k = round(z.real)
        if k != 0:
            z = z - k
            gamma = np.array([[1, -k], [0, 1]], dtype=np.int64) @ gamma
            length += 1
        if abs(z) * abs(z) < 1.0 - 1e-14:
            z = -1.0 / z
            gamma = np.array([[0, -1], [1, 0]], dtype=np.int64) @ gamma
            length += 1
        else:
            return z, gamma, length
    raise ReductionError(f"reduction did not terminate within {REDUCTION_CAP} moves")


def reduce_modular(z: complex) -> tuple[complex, int]:
    """Fundamental-domain representative of z and the number of moves."""
    z_red, _, length = reduce_modular_word(z)
    return z_red, length


def reduce_modular_batch(z: np.ndarray) -> np.ndarray:
    """Vectorized reduction of an array of upper-half-plane points."""
    z = np.asarray(z, dtype=complex).copy()
    if not (z.imag > 0).all():
        raise ValueError("all points must lie in the upper half plane")
    active = np.ones(z.shape, dtype=bool)
    for _ in range(REDUCTION_CAP):
        k = np.round(z.real[active])
        za = z[active] - k
        need_inv = (za.real * za.real + za.imag * za.imag) < 1.0 - 1e-14
        za[need_inv] = -1.0 / za[need_inv]
        z[active] = za
        still = np.zeros(z.shape, dtype=bool)
        still[active] = need_inv
        active = still
        if not active.any():
            return z
    raise ReductionError(
        f"{int(active.sum())} points failed to reduce within {REDUCTION_CAP} moves"
    )


def in_fundamental_domain(z: complex, tol: float = FD_TOL) -> bool:
    """Closed fundamental domain membership with tolerance."""
    return abs(z.real) <= 0.5 + tol and abs(z) >= 1.0 - tol


@dataclass(frozen=True)
class CosetPoint:
    """A point of the quotient, carried as a matrix representative together
    with the fundamental-domain position of its orbit on the half plane."""

    representative: GroupElement
    reduced_z: complex

    def __post_init__(self) -> None:
        if self.representative.n != 2:
            raise ValueError("coset points require 2x2 representatives")
        if not in_fundamental_domain(self.reduced_z):
            raise ValueError(f"{self.reduced_z!r} is outside the fundamental domain")
        z_check, _ = reduce_modular(mobius(self.representative.mat, 1j))
        zr = self.reduced_z
        # on the domain boundary two equivalent representatives exist; accept
        # either the reduction's pick or its mirror under inversion/translation
        candidates = (zr, -1.0 / zr, zr - 1.0, zr + 1.0)
        if min(abs(z_check - c) for c in candidates) > 1e-9:
            raise ValueError("reduced_z does not match the representative's orbit position")

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "CosetPoint":
        g = GroupElement(np.asarray(matrix, dtype=float))
        z_red, _ = reduce_modular(mobius(g.mat, 1j))
        return cls(representative=g, reduced_z=z_red)

    @classmethod
    def identity(cls) -> "CosetPoint":
        return cls(representative=GroupElement(np.eye(2)), reduced_z=1j)

    @classmethod
    def random(cls, rng: np.random.Generator, spread: float = 1.0) -> "CosetPoint":
        """A generic basepoint from a random unimodular matrix."""
        while True:
            raw = rng.normal(scale=spread, size=(2, 2))
            det = raw[0, 0] * raw[1, 1] - raw[0, 1] * raw[1, 0]
            if abs(det) > 1e-3:
                break
        if det < 0:
            raw[:, 1] *= -1.0
            det = -det
        return cls.from_matrix(raw / math.sqrt(det))


def periodic_basepoint() -> CosetPoint:
    """The identity coset; its horocycle orbit is periodic because the unit
    upper-triangular integer matrices translate it to itself."""
    return CosetPoint.identity()


@dataclass(frozen=True)
class TestFunction:
    """A test observable on the fundamental domain.

    kind "indicator-box": the characteristic function of
    [re_min, re_max] x [im_min, im_max].  kind "continuous-bump": a smooth
    bump supported on the same box, peaking at its center.  Zero-area boxes
    are allowed and give the zero function.
    """

    __test__ = False  # keep pytest from collecting this despite the name

    kind: str
    re_min: float
    re_max: float
    im_min: float
    im_max: float

    def __post_init__(self) -> None:
        if self.kind not in ("indicator-box", "continuous-bump"):
            raise ValueError(f"unknown test-function kind {self.kind!r}")
        if not (-0.5 <= self.re_min <= self.re_max <= 0.5):
            raise ValueError("real range must satisfy -1/2 <= re_min <= re_max <= 1/2")
        if not (0.0 < self.im_min <= self.im_max):
            raise ValueError("imaginary range must satisfy 0 < im_min <= im_max")
        if not math.isfinite(self.im_max):
            raise ValueError("support must stay bounded away from the cusp")

    @classmethod
    def standard_box(cls) -> "TestFunction":
        return cls("indicator-box", -0.5, 0.5, 1.0, 2.0)

    def __call__(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        if self.kind == "indicator-box":
            inside = (
                (x >= self.re_min) & (x <= self.re_max) & (y >= self.im_min) & (y <= self.im_max)
            )
            return inside.astype(float)
        out = np.zeros(z.shape, dtype=float)
        wx = 0.5 * (self.re_max - self.re_min)
        wy = 0.5 * (self.im_max - self.im_min)
        if wx == 0.0 or wy == 0.0:
            return out
        u = (x - 0.5 * (self.re_min + self.re_max)) / wx
        v = (y - 0.5 * (self.im_min + self.im_max)) / wy
        ok = (np.abs(u) < 1.0) & (np.abs(v) < 1.0)
        uu, vv = u[ok], v[ok]
        out[ok] = np.exp(2.0 - 1.0 / (1.0 - uu * uu) - 1.0 / (1.0 - vv * vv))
        return out


@dataclass
class MeanAccumulator:
    """Merge-safe streaming mean and variance (parallel Welford form)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0

    def add(self, values: np.ndarray) -> None:
        k = int(values.size)
        if k == 0:
            return
        bm = float(values.mean())
        bm2 = float(((values - bm) ** 2).sum())
        self._merge(k, bm, bm2)

    def merge(self, other: "MeanAccumulator") -> None:
        self._merge(other.count, other.mean, other.m2)

    def _merge(self, k: int, bm: float, bm2: float) -> None:
        if k == 0:
            return
        total = self.count + k
        d = bm - self.mean
        self.mean += d * k / total
        self.m2 += bm2 + d * d * self.count * k / total
        self.count = total

    def std_error(self) -> float:
        if self.count < 2:
            return math.nan
        return math.sqrt(self.m2 / (self.count - 1) / self.count)


def _orbit_positions(y: CosetPoint, S: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Half-plane positions of (representative . b^-1) . i for the batch of
    ball draws (S, t), with b = a(s) n(t) so b^-1 = [[1/p, -p t], [0, p]]."""
    p = np.exp(S[:, 0])
    tt = t[:, 0]
    yv = y.representative.mat
    g00 = yv[0, 0] / p
    g01 = (-yv[0, 0] * tt + yv[0, 1]) * p
    g10 = yv[1, 0] / p
    g11 = (-yv[1, 0] * tt + yv[1, 1]) * p
    num = g01 + 1j * g00
    den = g11 + 1j * g10
    return num / den


def _average(
    y: CosetPoint,
    f,
    T: float,
    samples: int,
    seed: int,
    chirality: str,
    threads: int,
) -> tuple[float, float]:
    if samples < 2:
        raise ValueError("need at least two samples for a standard error")
    if not T * T > 2.0:
        raise ValueError(f"radius {T!r} leaves an empty ball")
    workers = max(1, min(int(threads), 64))
    seeds = np.random.SeedSequence(seed).spawn(workers)
    shares = [samples // workers + (1 if i < samples % workers else 0) for i in range(workers)]

    def run(share: int, ss: np.random.SeedSequence) -> MeanAccumulator:
        rng = np.random.default_rng(ss)
        sampler = HaarBallSampler(2, T, chirality=chirality)
        acc = MeanAccumulator()
        left = share
        while left > 0:
            chunk = min(left, 1 << 17)
            S, t = sampler.sample_batch(rng, chunk)
            z = reduce_modular_batch(_orbit_positions(y, S, t))
            acc.add(np.asarray(f(z), dtype=float))
            left -= chunk
        return acc

    if workers == 1:
        total = run(shares[0], seeds[0])
    else:
        total = MeanAccumulator()
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(run, shares, seeds):
                total.merge(part)
    return total.mean, total.std_error()


def ergodic_average(
    y: CosetPoint,
    f,
    T: float,
    samples: int,
    seed: int = 0,
    *,
    threads: int = 1,
) -> tuple[float, float]:
    """Average of f over the right-invariant ball of radius T, evaluated
    along the orbit of y; converges to the hyperbolic-area integral of f."""
    return _average(y, f, T, samples, seed, "right", threads)


def left_haar_average(
    y: CosetPoint,
    f,
    T: float,
    samples: int,
    seed: int = 0,
    *,
    threads: int = 1,
) -> tuple[float, float]:
    """Same average under the left-invariant measure.  At a basepoint with
    periodic horocycle orbit this tends to zero instead of the area integral."""
    return _average(y, f, T, samples, seed, "left", threads)


def fundamental_domain_sample(rng: np.random.Generator, size: int) -> np.ndarray:
    """Exact draws from the normalized hyperbolic area on the fundamental
    domain: the x marginal is arcsine-shaped, so sin(uniform angle) gives x,
    and y is the lower boundary sqrt(1-x^2) divided by a uniform variate."""
    theta = rng.uniform(-math.pi / 6.0, math.pi / 6.0, size=size)
    x = np.sin(theta)
    v = rng.random(size)
    y = np.sqrt(1.0 - x * x) / v
    return x + 1j * y


def nu_integral(f, samples: int, seed: int = 0) -> tuple[float, float]:
    """Monte Carlo integral of f against the normalized invariant area on
    the fundamental domain; the independent reference for ball averages."""
    if samples < 2:
        raise ValueError("need at least two samples for a standard error")
    rng = np.random.default_rng(seed)
    acc = MeanAccumulator()
    left = samples
    while left > 0:
        chunk = min(left, 1 << 18)
        z = fundamental_domain_sample(rng, chunk)
        acc.add(np.asarray(f(z), dtype=float))
        left -= chunk
    return acc.mean, acc.std_error()


def nu_box_mass(f: TestFunction) -> float:
    """Exact area integral for an indicator box, by one-dimensional
    quadrature of the slice widths against the density 1/y^2."""
    if f.kind != "indicator-box":
        raise ValueError("closed-form mass only available for indicator boxes")
    from scipy.integrate import quad

    def slice_mass(x: float) -> float:
        floor = max(f.im_min, math.sqrt(max(0.0, 1.0 - x * x)))
        if floor >= f.im_max:
            return 0.0
        return 1.0 / floor - 1.0 / f.im_max

    val = quad(slice_mass, f.re_min, f.re_max, limit=200)[0]
    return val / FD_AREA
