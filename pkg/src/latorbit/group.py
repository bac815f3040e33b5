"""Core linear-group machinery: determinant-one matrices, the Frobenius norm,
Iwasawa (QR) coordinates, and upper-triangular Borel coordinates.

Conventions used throughout the package:

* ``s`` is a real vector of length ``n`` with ``sum(s) == 0``; it parametrises
  the diagonal part ``a(s) = diag(exp(s_1), ..., exp(s_n))``.
* ``t`` is a flat vector of length ``n*(n-1)/2`` holding the strictly
  upper-triangular entries of a unipotent matrix in row-major order, i.e. the
  pair list ``(0,1), (0,2), ..., (0,n-1), (1,2), ...``.
* A Borel element is ``b = a(s) n(t)``, so ``b[i, j] = exp(s_i) * t[(i, j)]``
  above the diagonal and ``exp(s_i)`` on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DET_TOL = 1e-9
SUM_TOL = 1e-9
EXP_CAP = 300.0  # exp(2*s) overflows double a bit beyond this
MIN_N = 2
MAX_N = 6


def _check_dim(n: int) -> None:
    if not MIN_N <= n <= MAX_N:
        raise ValueError(f"matrix dimension must be in [{MIN_N}, {MAX_N}], got {n}")


@dataclass(frozen=True)
class GroupElement:
    """A real n-by-n matrix with determinant 1 (within DET_TOL)."""

    mat: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mat, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        _check_dim(m.shape[0])
        det = float(np.linalg.det(m))
        if abs(det - 1.0) > DET_TOL:
            raise ValueError(f"determinant {det!r} is not 1 within {DET_TOL}")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "mat", m)

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return GroupElement(self.mat @ other.mat)

    def inv(self) -> "GroupElement":
        return GroupElement(np.linalg.inv(self.mat))


def pair_indices(n: int) -> list[tuple[int, int]]:
    """Row-major list of strictly upper-triangular index pairs."""
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _check_s(s: np.ndarray, tol: float = SUM_TOL) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 1:
        raise ValueError("s must be a 1-d vector")
    _check_dim(s.size)
    total = float(s.sum())
    if abs(total) > tol:
        raise ValueError(f"sum(s) = {total!r} is not 0 within {tol}")
    return s


@dataclass(frozen=True)
class BorelCoords:
    """Coordinates (s, t) for an upper-triangular element a(s) n(t)."""

    s: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        s = _check_s(self.s, tol=1e-12)
        t = np.asarray(self.t, dtype=float)
        n = s.size
        if t.shape != (n * (n - 1) // 2,):
            raise ValueError(
                f"t must have length n(n-1)/2 = {n * (n - 1) // 2}, got shape {t.shape}"
            )
        s = s.copy()
        t = t.copy()
        s.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "t", t)

    @property
    def n(self) -> int:
        return self.s.size


@dataclass(frozen=True)
class IwasawaCoords:
    """Decomposition g = k * a(s) * n(t) with k special orthogonal."""

    k: np.ndarray
    borel: BorelCoords

    @property
    def n(self) -> int:
        return self.borel.n


def frobenius_norm(g: GroupElement | np.ndarray) -> float:
    """Square root of the sum of squared entries."""
    m = g.mat if isinstance(g, GroupElement) else np.asarray(g, dtype=float)
    return float(np.sqrt((m * m).sum()))


def diagonal_part(s: np.ndarray) -> np.ndarray:
    """Matrix a(s) = diag(exp(s_i))."""
    s = _check_s(s)
    return np.diag(np.exp(s))


def unipotent_part(n: int, t: np.ndarray) -> np.ndarray:
    """Upper unipotent matrix with strict upper entries t (row-major)."""
    _check_dim(n)
    t = np.asarray(t, dtype=float)
    m = np.eye(n)
    iu = np.triu_indices(n, k=1)
    m[iu] = t
    return m


def borel_matrix(b: BorelCoords) -> np.ndarray:
    """The matrix a(s) n(t)."""
    return diagonal_part(b.s) @ unipotent_part(b.n, b.t)


def iwasawa_decompose(g: GroupElement) -> IwasawaCoords:
    """Split g = k a(s) n(t) via QR with positive diagonal.

    numpy's QR may return R with negative diagonal entries; flipping the
    corresponding rows of R and columns of Q restores positivity without
    changing the product.  Tiny trace drift in s (from det(g) = 1 only up
    to DET_TOL) is projected out so that BorelCoords stays valid; the
    reconstruction error this introduces is below DET_TOL.
    """
    q, r = np.linalg.qr(g.mat)
    sign = np.sign(np.diag(r))
    sign[sign == 0] = 1.0  # cannot occur for invertible g, kept for safety
    q = q * sign[np.newaxis, :]
    r = r * sign[:, np.newaxis]
    diag = np.diag(r).copy()
    s = np.log(diag)
    s -= s.mean()
    t = (r / diag[:, np.newaxis])[np.triu_indices(g.n, k=1)]
    return IwasawaCoords(k=q, borel=BorelCoords(s=s, t=t))


def delta(s: np.ndarray) -> float:
    """Weighted sum ``sum_k (n-k) s_k`` (1-based k), the modular exponent
    relating left and right translation-invariant volumes on the upper
    triangular group."""
    s = _check_s(s)
    n = s.size
    return float(np.dot(np.arange(n - 1, -1, -1, dtype=float), s))


def squared_exp_sum(s: np.ndarray) -> float:
    """N(s) = sum_i exp(2 s_i), the squared norm of the diagonal part."""
    s = _check_s(s)
    if float(np.max(s)) > EXP_CAP:
        raise OverflowError(f"max(s) = {np.max(s)!r} exceeds overflow guard {EXP_CAP}")
    return float(np.exp(2.0 * s).sum())


def borel_norm_sq(b: BorelCoords) -> float:
    """Squared Frobenius norm of a(s) n(t): N(s) + sum exp(2 s_i) t_ij^2.

    Row i contributes exp(2 s_i) * (1 + sum_j t_ij^2).
    """
    if float(np.max(b.s)) > EXP_CAP:
        raise OverflowError(f"max(s) = {np.max(b.s)!r} exceeds overflow guard {EXP_CAP}")
    n = b.n
    e2 = np.exp(2.0 * b.s)
    total = float(e2.sum())
    for (i, _), tv in zip(pair_indices(n), b.t):
        total += float(e2[i]) * float(tv) * float(tv)
    return total


def adjoint_scaling(s: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Conjugation a(s) n(t) a(s)^-1 = n(t') with t'_ij = exp(s_i - s_j) t_ij."""
    s = _check_s(s)
    t = np.asarray(t, dtype=float)
    n = s.size
    if t.shape != (n * (n - 1) // 2,):
        raise ValueError("t has wrong length for this s")
    scale = np.array([math.exp(s[i] - s[j]) for i, j in pair_indices(n)])
    return scale * t


def haar_orthogonal(n: int, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
    """Haar-uniform special orthogonal matrices.

    QR of a standard Gaussian matrix with the R diagonal made positive is
    Haar on O(n); flipping the sign of the last column when det = -1 maps
    it onto SO(n) without biasing the distribution.
    """
    _check_dim(n)
    shape = (n, n) if size is None else (size, n, n)
    z = rng.standard_normal(shape)
    q, r = np.linalg.qr(z)
    d = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    d = np.where(d == 0, 1.0, d)
    q = q * d[..., np.newaxis, :]
    det = np.linalg.det(q)
    if size is None:
        if det < 0:
            q[:, -1] = -q[:, -1]
    else:
        q[det < 0, :, -1] *= -1.0
    return q


def random_element(n: int, rng: np.random.Generator, scale: float = 1.0) -> GroupElement:
    """Random determinant-one matrix: exp of a traceless uniform matrix.

    Intended for property tests; the distribution is not canonical.
    """
    from scipy.linalg import expm

    _check_dim(n)
    x = rng.uniform(-scale, scale, size=(n, n))
    x -= np.trace(x) / n * np.eye(n)
    return GroupElement(expm(x))
