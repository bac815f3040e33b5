"""Enumeration of integer matrices with determinant one inside Frobenius-norm
balls, optionally restricted to principal congruence subgroups.

The enumerator walks prefixes of rows in lexicographic order and completes the
last row exactly.  For a prefix of n-1 rows the determinant is linear in the
last row x: det = w . x where w is the (signed) cofactor vector of the prefix,
so the admissible last rows form an affine sublattice of rank n-1 intersected
with a ball, which is enumerated without search.  All norm comparisons are
exact integer comparisons against ``norm_sq_threshold(T)``.

Specialised nopython kernels handle n = 2 and n = 3; a pure-Python route
covers every supported n (slowly) and doubles as a cross-check.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from latorbit.group import MAX_N, MIN_N, _check_dim

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


DEFAULT_MAX_ELEMENTS = 10**8

# int64-safety ceilings for the specialised kernels (see discriminant bounds
# in the completion routines); counts far exceed any practical budget before
# these are reached.
_KSQ_CAP_N2 = 6 * 10**8
_KSQ_CAP_N3 = 22500

# aimed-for rows per emitted block of the streaming enumerator; keeps the
# resident set bounded however large the ball is
_BLOCK_TARGET = 1 << 19


class BudgetExceededError(RuntimeError):
    """Raised when an enumeration would emit more elements than allowed."""


def norm_sq_threshold(T: float) -> int:
    """Largest integer K with K < T*T; integer squared norms <= K lie
    strictly inside the radius-T ball.  Radii whose square is an exact
    integer therefore exclude the sphere itself."""
    if not (math.isfinite(T) and T > 0):
        raise ValueError(f"radius must be positive and finite, got {T!r}")
    tt = T * T
    k = math.floor(tt)
    if float(k) == tt:
        k -= 1
    return k


def _int_det(rows: list[list[int]]) -> int:
    """Exact integer determinant by cofactor expansion (fine for n <= 6)."""
    n = len(rows)
    if n == 1:
        return rows[0][0]
    if n == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = 0
    for j in range(n):
        if rows[0][j] == 0:
            continue
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        sign = 1 if j % 2 == 0 else -1
        total += sign * rows[0][j] * _int_det(minor)
    return total


@dataclass(frozen=True)
class LatticeElement:
    """An integer matrix with determinant exactly 1."""

    mat: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mat)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {m.shape}")
        _check_dim(m.shape[0])
        if not np.issubdtype(m.dtype, np.integer):
            raise ValueError("entries must be integers")
        m = m.astype(np.int64)
        d = _int_det([[int(v) for v in row] for row in m])
        if d != 1:
            raise ValueError(f"determinant is {d}, not 1")
        m.flags.writeable = False
        object.__setattr__(self, "mat", m)

    @property
    def n(self) -> int:
        return self.mat.shape[0]

    def norm_sq(self) -> int:
        return int((self.mat.astype(object) ** 2).sum())


@dataclass(frozen=True)
class SubgroupSpec:
    """Which arithmetic subgroup to enumerate.

    kind "full" is the whole determinant-one integer group; kind
    "principal-congruence" keeps matrices congruent to the identity mod q.
    """

    kind: str = "full"
    q: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("full", "principal-congruence"):
            raise ValueError(f"unknown subgroup kind {self.kind!r}")
        if self.kind == "principal-congruence":
            if not (isinstance(self.q, int) and self.q >= 2):
                raise ValueError(f"congruence modulus must be an integer >= 2, got {self.q!r}")
        elif self.q != 1:
            raise ValueError("kind 'full' takes q = 1")

    @classmethod
    def full(cls) -> "SubgroupSpec":
        return cls()

    @classmethod
    def congruence(cls, q: int) -> "SubgroupSpec":
        return cls(kind="principal-congruence", q=q)

    @classmethod
    def from_modulus(cls, q: int) -> "SubgroupSpec":
        """q = 1 means the full group, q >= 2 the principal congruence level."""
        return cls.full() if q == 1 else cls.congruence(q)

    def block_mask(self, block: np.ndarray, n: int) -> np.ndarray:
        """Boolean mask of rows (flattened matrices) lying in the subgroup."""
        if self.kind == "full":
            return np.ones(block.shape[0], dtype=bool)
        eye = np.eye(n, dtype=np.int64).reshape(-1)
        return (np.mod(block - eye, self.q) == 0).all(axis=1)


# ---------------------------------------------------------------------------
# nopython helpers


@njit(cache=True, nogil=True)
def _isqrt(x):
    if x < 0:
        return -1
    r = int(math.sqrt(float(x)))
    while r * r > x:
        r -= 1
    while (r + 1) * (r + 1) <= x:
        r += 1
    return r


@njit(cache=True, nogil=True)
def _round_div(a, b):
    # nearest integer to a/b for b > 0, halves toward minus infinity
    q = a // b
    r = a - q * b
    if 2 * r > b:
        q += 1
    return q


@njit(cache=True, nogil=True)
def _quad_range(qa, qb, qc):
    """Integer interval where qa*k^2 + qb*k + qc <= 0 (qa > 0).

    Float roots locate the endpoints to within one or two units for the
    coefficient sizes the kernels allow; bounded exact-integer adjustment
    then certifies them.  Returns (1, 0) when the interval is empty.
    """
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        return 1, 0
    sq = math.sqrt(float(disc))
    lo = int(math.ceil((-float(qb) - sq) / (2.0 * float(qa))))
    hi = int(math.floor((-float(qb) + sq) / (2.0 * float(qa))))
    for _ in range(8):
        k = lo - 1
        if qa * k * k + qb * k + qc <= 0:
            lo = k
        else:
            break
    for _ in range(8):
        if qa * lo * lo + qb * lo + qc > 0:
            lo += 1
        else:
            break
    for _ in range(8):
        k = hi + 1
        if qa * k * k + qb * k + qc <= 0:
            hi = k
        else:
            break
    for _ in range(8):
        if qa * hi * hi + qb * hi + qc > 0:
            hi -= 1
        else:
            break
    if hi < lo:
        return 1, 0
    if qa * lo * lo + qb * lo + qc > 0 or qa * hi * hi + qb * hi + qc > 0:
        return 1, 0
    return lo, hi


@njit(cache=True, nogil=True)
def _complete_rows_2(rows, ksq):
    """Given primitive first rows (a, b), emit all (a, b, c, d) with
    a d - b c = 1 and a^2+b^2+c^2+d^2 <= ksq, lexicographically."""
    cap = 1024
    out = np.empty((cap, 4), np.int64)
    m = 0
    for idx in range(rows.shape[0]):
        a = rows[idx, 0]
        b = rows[idx, 1]
        q = ksq - a * a - b * b
        if q < 1:
            continue
        # extended euclid: x*a + y*b = g = +-1
        old_r, r = a, b
        old_x, x = 1, 0
        old_y, y = 0, 1
        while r != 0:
            qq = old_r // r
            old_r, r = r, old_r - qq * r
            old_x, x = x, old_x - qq * x
            old_y, y = y, old_y - qq * y
        if old_r == -1:
            old_x = -old_x
            old_y = -old_y
        d0 = old_x
        c0 = -old_y
        alpha = a * a + b * b
        # shift the particular solution near the origin to keep ints small
        k0 = _round_div(-(a * c0 + b * d0), alpha)
        c0 += k0 * a
        d0 += k0 * b
        beta = 2 * (a * c0 + b * d0)
        gamma = c0 * c0 + d0 * d0 - q
        k_lo, k_hi = _quad_range(alpha, beta, gamma)
        if k_hi < k_lo:
            continue
        cnt = k_hi - k_lo + 1
        while m + cnt > cap:
            cap *= 2
            nb = np.empty((cap, 4), np.int64)
            nb[:m] = out[:m]
            out = nb
        ascending = a > 0 or (a == 0 and b > 0)
        if ascending:
            for k in range(k_lo, k_hi + 1):
                out[m, 0] = a
                out[m, 1] = b
                out[m, 2] = c0 + k * a
                out[m, 3] = d0 + k * b
                m += 1
        else:
            for k in range(k_hi, k_lo - 1, -1):
                out[m, 0] = a
                out[m, 1] = b
                out[m, 2] = c0 + k * a
                out[m, 3] = d0 + k * b
                m += 1
    return out[:m]


@njit(cache=True, nogil=True)
def _egcd(a, b):
    old_r, r = a, b
    old_x, x = 1, 0
    old_y, y = 0, 1
    while r != 0:
        qq = old_r // r
        old_r, r = r, old_r - qq * r
        old_x, x = x, old_x - qq * x
        old_y, y = y, old_y - qq * y
    if old_r < 0:
        return -old_r, -old_x, -old_y
    return old_r, old_x, old_y


@njit(cache=True, nogil=True)
def _solve_affine_plane(w0, w1, w2, budget, buf):
    """All integer x with w . x = 1 and |x|^2 <= budget, written into buf.

    Returns the count, or -1 if buf is too small.  w must be primitive and
    nonzero.  The solutions are the coset p + Z b1 + Z b2 of the rank-2
    kernel lattice of w; the pair (b1, b2) below is an exact basis (their
    cross product equals w) which is then Lagrange-reduced.
    """
    cap = buf.shape[0]
    cnt = 0
    if w0 == 0 and w1 == 0:
        s = 1 if w2 > 0 else -1
        rem = budget - 1
        if rem < 0:
            return 0
        xb = _isqrt(rem)
        for x in range(-xb, xb + 1):
            rem2 = rem - x * x
            yb = _isqrt(rem2)
            if cnt + 2 * yb + 1 > cap:
                return -1
            for yv in range(-yb, yb + 1):
                buf[cnt, 0] = x
                buf[cnt, 1] = yv
                buf[cnt, 2] = s
                cnt += 1
        return cnt

    g1, u0, u1 = _egcd(w0, w1)
    _, v0, v1 = _egcd(g1, w2)
    p0 = v0 * u0
    p1 = v0 * u1
    p2 = v1
    b10 = w1 // g1
    b11 = -(w0 // g1)
    b12 = 0
    b20 = u0 * w2
    b21 = u1 * w2
    b22 = -g1

    # Lagrange reduction of (b1, b2)
    for _ in range(128):
        n1 = b10 * b10 + b11 * b11 + b12 * b12
        n2 = b20 * b20 + b21 * b21 + b22 * b22
        if n1 > n2:
            b10, b20 = b20, b10
            b11, b21 = b21, b11
            b12, b22 = b22, b12
            n1, n2 = n2, n1
        d = b10 * b20 + b11 * b21 + b12 * b22
        mu = _round_div(d, n1)
        if mu == 0:
            break
        b20 -= mu * b10
        b21 -= mu * b11
        b22 -= mu * b12

    # pull the particular solution toward the origin
    for _ in range(2):
        n2 = b20 * b20 + b21 * b21 + b22 * b22
        mu = _round_div(p0 * b20 + p1 * b21 + p2 * b22, n2)
        p0 -= mu * b20
        p1 -= mu * b21
        p2 -= mu * b22
        n1 = b10 * b10 + b11 * b11 + b12 * b12
        mu = _round_div(p0 * b10 + p1 * b11 + p2 * b12, n1)
        p0 -= mu * b10
        p1 -= mu * b11
        p2 -= mu * b12

    g11 = b10 * b10 + b11 * b11 + b12 * b12
    g12 = b10 * b20 + b11 * b21 + b12 * b22
    g22 = b20 * b20 + b21 * b21 + b22 * b22
    pb1 = p0 * b10 + p1 * b11 + p2 * b12
    pb2 = p0 * b20 + p1 * b21 + p2 * b22
    pp = p0 * p0 + p1 * p1 + p2 * p2

    # range of j: G11*|p + i b1 + j b2|^2 minimised over real i stays <= budget
    A = g11 * g22 - g12 * g12
    B = 2 * (g11 * pb2 - g12 * pb1)
    C = g11 * (pp - budget) - pb1 * pb1
    j_lo, j_hi = _quad_range(A, B, C)
    if j_hi < j_lo:
        return 0

    for j in range(j_lo, j_hi + 1):
        bi = 2 * (pb1 + j * g12)
        ci = pp + 2 * j * pb2 + j * j * g22 - budget
        i_lo, i_hi = _quad_range(g11, bi, ci)
        if i_hi < i_lo:
            continue
        if cnt + (i_hi - i_lo + 1) > cap:
            return -1
        for i in range(i_lo, i_hi + 1):
            buf[cnt, 0] = p0 + i * b10 + j * b20
            buf[cnt, 1] = p1 + i * b11 + j * b21
            buf[cnt, 2] = p2 + i * b12 + j * b22
            cnt += 1
    return cnt


@njit(cache=True, nogil=True)
def _complete_rows_3(rows, ksq):
    """Given primitive first rows, emit all 3x3 determinant-one completions
    inside the ksq ball, lexicographically by flattened matrix."""
    cap = 4096
    out = np.empty((cap, 9), np.int64)
    m = 0
    bufcap = 4096
    buf = np.empty((bufcap, 3), np.int64)
    for idx in range(rows.shape[0]):
        a0 = rows[idx, 0]
        a1 = rows[idx, 1]
        a2 = rows[idx, 2]
        na = a0 * a0 + a1 * a1 + a2 * a2
        bound2 = ksq - na - 1
        if bound2 < 1:
            continue
        xb = _isqrt(bound2)
        for x in range(-xb, xb + 1):
            r2x = bound2 - x * x
            yb = _isqrt(r2x)
            for yv in range(-yb, yb + 1):
                r2y = r2x - yv * yv
                zb = _isqrt(r2y)
                for z in range(-zb, zb + 1):
                    # second row must be primitive
                    g = x if x >= 0 else -x
                    t = yv if yv >= 0 else -yv
                    while t != 0:
                        g, t = t, g % t
                    t = z if z >= 0 else -z
                    while t != 0:
                        g, t = t, g % t
                    if g != 1:
                        continue
                    # cofactor vector of the 2-row prefix (cross product)
                    w0 = a1 * z - a2 * yv
                    w1 = a2 * x - a0 * z
                    w2 = a0 * yv - a1 * x
                    if w0 == 0 and w1 == 0 and w2 == 0:
                        continue
                    g = w0 if w0 >= 0 else -w0
                    t = w1 if w1 >= 0 else -w1
                    while t != 0:
                        g, t = t, g % t
                    t = w2 if w2 >= 0 else -w2
                    while t != 0:
                        g, t = t, g % t
                    if g != 1:
                        continue
                    budget3 = ksq - na - (x * x + yv * yv + z * z)
                    cnt = _solve_affine_plane(w0, w1, w2, budget3, buf)
                    while cnt < 0:
                        bufcap *= 2
                        buf = np.empty((bufcap, 3), np.int64)
                        cnt = _solve_affine_plane(w0, w1, w2, budget3, buf)
                    if cnt == 0:
                        continue
                    # lexicographic order within the prefix: insertion sort
                    for i in range(1, cnt):
                        c0 = buf[i, 0]
                        c1 = buf[i, 1]
                        c2 = buf[i, 2]
                        jj = i - 1
                        while jj >= 0 and (
                            buf[jj, 0] > c0
                            or (buf[jj, 0] == c0 and buf[jj, 1] > c1)
                            or (buf[jj, 0] == c0 and buf[jj, 1] == c1 and buf[jj, 2] > c2)
                        ):
                            buf[jj + 1, 0] = buf[jj, 0]
                            buf[jj + 1, 1] = buf[jj, 1]
                            buf[jj + 1, 2] = buf[jj, 2]
                            jj -= 1
                        buf[jj + 1, 0] = c0
                        buf[jj + 1, 1] = c1
                        buf[jj + 1, 2] = c2
                    while m + cnt > cap:
                        cap *= 2
                        nb = np.empty((cap, 9), np.int64)
                        nb[:m] = out[:m]
                        out = nb
                    for i in range(cnt):
                        out[m, 0] = a0
                        out[m, 1] = a1
                        out[m, 2] = a2
                        out[m, 3] = x
                        out[m, 4] = yv
                        out[m, 5] = z
                        out[m, 6] = buf[i, 0]
                        out[m, 7] = buf[i, 1]
                        out[m, 8] = buf[i, 2]
                        m += 1
    return out[:m]


# ---------------------------------------------------------------------------
# first-row generation (vectorised, lexicographic, chunked)


def _first_row_chunks(n: int, bound: int, target: int = 1 << 19) -> Iterator[np.ndarray]:
    """Primitive integer rows with squared norm <= bound, in lex order,
    yielded in chunks of roughly `target` candidate rows."""
    if bound < 1:
        return
    amax = math.isqrt(bound)
    axis = np.arange(-amax, amax + 1, dtype=np.int64)
    per_first = len(axis) ** (n - 1)
    width = max(1, target // per_first)
    for start in range(0, len(axis), width):
        first = axis[start : start + width]
        grids = np.meshgrid(first, *([axis] * (n - 1)), indexing="ij")
        rows = np.stack([g.reshape(-1) for g in grids], axis=1)
        norm = (rows * rows).sum(axis=1)
        keep = norm <= bound
        g = np.gcd.reduce(np.abs(rows), axis=1)
        keep &= g == 1
        rows = rows[keep]
        if rows.shape[0]:
            yield rows



# ---------------------------------------------------------------------------
# generic (pure-Python) route: any supported n, exact arithmetic


def _cofactor_vector(prefix: list[list[int]], n: int) -> list[int]:
    """w with det([prefix; x]) = w . x for the final row x."""
    w = []
    for j in range(n):
        minor = [row[:j] + row[j + 1 :] for row in prefix]
        sign = 1 if (n - 1 + j) % 2 == 0 else -1
        w.append(sign * _int_det(minor))
    return w


def _last_rows(w: list[int], budget: int) -> list[tuple[int, ...]]:
    """All integer x with w . x = 1 and |x|^2 <= budget, sorted lex.

    Solved by iterating the non-pivot coordinates and dividing out the
    entry of largest magnitude; exact Python integers throughout.
    """
    n = len(w)
    if all(v == 0 for v in w):
        return []
    g = 0
    for v in w:
        g = math.gcd(g, abs(v))
    if g != 1:
        return []
    pivot = max(range(n), key=lambda j: abs(w[j]))
    free = [j for j in range(n) if j != pivot]
    sols: list[tuple[int, ...]] = []
    x = [0] * n

    def rec(i: int, used: int, partial: int) -> None:
        if i == len(free):
            rem = 1 - partial
            if rem % w[pivot] != 0:
                return
            xp = rem // w[pivot]
            if used + xp * xp <= budget:
                x[pivot] = xp
                sols.append(tuple(x))
            return
        j = free[i]
        b = math.isqrt(budget - used)
        for v in range(-b, b + 1):
            x[j] = v
            rec(i + 1, used + v * v, partial + v * w[j])

    rec(0, 0, 0)
    sols.sort()
    return sols


def _primitive_rows(n: int, bound: int) -> list[list[int]]:
    """Primitive integer rows with squared norm in [1, bound], lex order."""
    rows: list[list[int]] = []
    if bound < 1:
        return rows
    vec = [0] * n

    def rec(j: int, rsq: int) -> None:
        b = math.isqrt(bound - rsq)
        for v in range(-b, b + 1):
            vec[j] = v
            if j == n - 1:
                rs = rsq + v * v
                if rs == 0:
                    continue
                g = 0
                for u in vec:
                    g = math.gcd(g, abs(u))
                if g == 1:
                    rows.append(vec[:])
            else:
                rec(j + 1, rsq + v * v)

    rec(0, 0)
    return rows


def _enumerate_generic(n: int, ksq: int) -> Iterator[np.ndarray]:
    """Row-by-row depth-first search with exact last-row completion.

    Reference implementation for every supported n; practical only for
    small radii, and the fast kernels are cross-checked against it.
    """
    pending: list[list[int]] = []
    prefix: list[list[int]] = []

    def inner(depth: int, used: int) -> None:
        if depth == n - 1:
            w = _cofactor_vector(prefix, n)
            flat_prefix = [v for row in prefix for v in row]
            for x in _last_rows(w, ksq - used):
                pending.append(flat_prefix + list(x))
            return
        remaining = n - depth
        cap = ksq - used - (remaining - 1)
        if cap < 1:
            return
        row = [0] * n

        def entry(j: int, rsq: int) -> None:
            b = math.isqrt(cap - rsq)
            for v in range(-b, b + 1):
                row[j] = v
                if j == n - 1:
                    rs = rsq + v * v
                    if rs == 0:
                        continue
                    g = 0
                    for u in row:
                        g = math.gcd(g, abs(u))
                    if g != 1:
                        continue
                    prefix.append(row[:])
                    inner(depth + 1, used + rs)
                    prefix.pop()
                else:
                    entry(j + 1, rsq + v * v)

        entry(0, 0)

    for r1 in _primitive_rows(n, ksq - (n - 1)):
        prefix = [r1]
        inner(1, sum(v * v for v in r1))
        if len(pending) >= (1 << 14):
            yield np.array(pending, dtype=np.int64)
            pending = []
    if pending:
        yield np.array(pending, dtype=np.int64)


# ---------------------------------------------------------------------------
# streaming driver


def iter_element_blocks(
    n: int,
    T: float,
    subgroup: SubgroupSpec | None = None,
    *,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
    threads: int = 1,
    force_generic: bool = False,
) -> Iterator[np.ndarray]:
    """Stream the elements of norm < T as blocks of flattened int64 rows.

    Blocks arrive in lexicographic order of the flattened matrices; their
    concatenation is the full list.  The element budget is charged against
    the whole-group enumeration even when a congruence filter discards
    rows afterwards, since that is what bounds the work done.
    """
    _check_dim(n)
    if subgroup is None:
        subgroup = SubgroupSpec.full()
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    ksq = norm_sq_threshold(T)
    if ksq < n:
        return
    use_kernel = HAVE_NUMBA and not force_generic and n in (2, 3)
    if use_kernel and n == 2 and ksq > _KSQ_CAP_N2:
        raise ValueError(f"radius too large for the n=2 kernel (ksq > {_KSQ_CAP_N2})")
    if use_kernel and n == 3 and ksq > _KSQ_CAP_N3:
        raise ValueError(f"radius too large for the n=3 kernel (ksq > {_KSQ_CAP_N3})")

    emitted = 0

    def charge(block: np.ndarray) -> np.ndarray:
        nonlocal emitted
        emitted += block.shape[0]
        if emitted > max_elements:
            raise BudgetExceededError(
                f"enumeration exceeded the ceiling of {max_elements} elements"
            )
        mask = subgroup.block_mask(block, n)
        return block if mask.all() else block[mask]

    if not use_kernel:
        for block in _enumerate_generic(n, ksq):
            block = charge(block)
            if block.shape[0]:
                yield block
        return

    kernel = _complete_rows_2 if n == 2 else _complete_rows_3
    bound1 = ksq - (n - 1)

    # Completions per first row range from a handful (n=2) to tens of
    # thousands (n=3 at large radii) and oscillate along the lex order, so
    # batches of first rows are sized from the worst rate seen so far to
    # keep every emitted block near _BLOCK_TARGET rows.  Batch growth is
    # capped at 8x per step so early optimistic observations cannot let a
    # single call swallow the remaining work.
    worst_rate = 1.0
    last_k = 0
    # threaded runs hold a window of unfinished batches that were sized
    # before their outputs could update the rate, so they aim for smaller
    # blocks and ramp up more carefully
    block_target = _BLOCK_TARGET if threads == 1 else max(1 << 16, _BLOCK_TARGET // threads)
    growth = 8 if threads == 1 else 2

    def batches() -> Iterator[np.ndarray]:
        for rows in _first_row_chunks(n, bound1):
            start = 0
            while start < rows.shape[0]:
                if last_k == 0:
                    k = 1
                else:
                    k = int(max(1, min(1 << 18, growth * last_k,
                                       block_target / worst_rate)))
                yield rows[start : start + k]
                start += k

    def learn(batch_rows: int, out_rows: int) -> None:
        nonlocal worst_rate, last_k
        worst_rate = max(worst_rate, out_rows / batch_rows)
        last_k = batch_rows

    if threads == 1:
        for batch in batches():
            out = kernel(batch, ksq)
            learn(batch.shape[0], out.shape[0])
            block = charge(out)
            if block.shape[0]:
                yield block
        return

    # parallel mode partitions the work by first row; block order is kept
    # identical to the serial run by collecting futures in submission order
    with ThreadPoolExecutor(max_workers=threads) as pool:
        window: list = []

        def drain() -> Iterator[np.ndarray]:
            batch_rows, fut = window.pop(0)
            out = fut.result()
            learn(batch_rows, out.shape[0])
            block = charge(out)
            if block.shape[0]:
                yield block

        for batch in batches():
            window.append((batch.shape[0], pool.submit(kernel, batch, ksq)))
            if len(window) >= threads * 2:
                yield from drain()
        while window:
            yield from drain()


def enumerate_lattice(
    n: int,
    T: float,
    subgroup: SubgroupSpec | None = None,
    *,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
    threads: int = 1,
    force_generic: bool = False,
) -> Iterator[LatticeElement]:
    """Yield the subgroup elements with Frobenius norm < T one by one,
    in lexicographic order of the flattened matrix."""
    for block in iter_element_blocks(
        n,
        T,
        subgroup,
        max_elements=max_elements,
        threads=threads,
        force_generic=force_generic,
    ):
        for row in block:
            yield LatticeElement(row.reshape(n, n))


def count_norm_ball(
    n: int,
    T: float,
    subgroup: SubgroupSpec | None = None,
    *,
    max_elements: int = DEFAULT_MAX_ELEMENTS,
    threads: int = 1,
    force_generic: bool = False,
) -> int:
    """Number of subgroup elements with Frobenius norm < T."""
    total = 0
    for block in iter_element_blocks(
        n,
        T,
        subgroup,
        max_elements=max_elements,
        threads=threads,
        force_generic=force_generic,
    ):
        total += block.shape[0]
    return total


def write_element_dump(path, blocks: Iterator[np.ndarray]) -> int:
    """Write flattened elements one per line (row-major, space separated).

    Returns the number of lines written.
    """
    count = 0
    with open(path, "w", encoding="ascii") as fh:
        for block in blocks:
            for row in block:
                fh.write(" ".join(str(int(v)) for v in row))
                fh.write("\n")
                count += 1
    return count


def read_element_dump(path, n: int) -> np.ndarray:
    """Read a dump produced by write_element_dump into an (m, n*n) array."""
    rows = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            vals = [int(v) for v in line.split()]
            if len(vals) != n * n:
                raise ValueError(f"line has {len(vals)} entries, expected {n * n}")
            rows.append(vals)
    if not rows:
        return np.empty((0, n * n), dtype=np.int64)
    return np.array(rows, dtype=np.int64)
