"""Volumes of Frobenius-norm balls in the upper-triangular group, and
sampling from the translation-invariant measures restricted to them.

In the coordinates b = a(s) n(t) the right-invariant volume is
exp(2 delta(s)) ds dt and the left-invariant one is ds dt.  Integrating
out t over its ellipsoidal slice {sum exp(2 s_i) t_ij^2 < T^2 - N(s)}
leaves an (n-1)-fold integral over the diagonal coordinates:

    vol = c_n * Int (T^2 - N(s))^(m/2) * exp(+-delta(s)) ds,

with m = n(n-1)/2, c_n the euclidean unit-ball volume in dimension m, the
plus sign for the right-invariant measure, minus for the left.  The s
domain is cut to s_i > C (i < n) when a cone parameter is given.

The same integrand read as an unnormalised density drives the rejection
sampler: it is strictly log-concave on its convex domain (N is strictly
convex, log of the slice factor concave), so a flat envelope at the mode
height over a bounding box is a valid dominating proposal.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq, minimize

from latorbit.group import BorelCoords, _check_dim, pair_indices

_EXP_CAP = 700.0


def _exp(x: float) -> float:
    return math.inf if x > _EXP_CAP else math.exp(x)


def gamma_n(n: int) -> float:
    """Leading coefficient of the ball volume growth vol ~ gamma_n * T^(n^2-n),
    evaluated through log-gamma for stability."""
    if not (isinstance(n, int) and n >= 2):
        raise ValueError(f"n must be an integer >= 2, got {n!r}")
    m = n * (n - 1) / 2.0
    lg = (m / 2.0) * math.log(math.pi) - (n - 1) * math.log(2.0)
    lg -= math.lgamma((n * n - n + 2) / 2.0)
    for k in range(1, n):
        lg += math.lgamma((n - k) / 2.0)
    return math.exp(lg)


def ball_volume_constant(n: int) -> float:
    """Euclidean unit-ball volume in dimension n(n-1)/2 (the t-slice factor)."""
    _check_dim(n)
    m = n * (n - 1) / 2.0
    return math.exp((m / 2.0) * math.log(math.pi) - math.lgamma(1.0 + m / 2.0))


@dataclass(frozen=True)
class VolumeResult:
    """A ball volume together with the quadrature error estimate."""

    value: float
    error: float
    n: int
    T: float
    C: float
    chirality: str = "right"


def _feasible_interval(n: int, k: int, sigma: float, P: float, Tsq: float, C: float):
    """Interval of s_k keeping the ball slice nonempty, given the partial
    sum sigma and partial exponential sum P of s_1..s_{k-1}; the tail
    coordinates contribute at least (n-k) * exp(-2 (sigma+s_k) / (n-k))."""
    r = n - k

    def h(sk: float) -> float:
        return P + _exp(2.0 * sk) + r * _exp(-2.0 * (sigma + sk) / r)

    s_star = -sigma / (r + 1)
    if h(s_star) >= Tsq:
        return None
    a = s_star - 1.0
    while h(a) < Tsq:
        a -= 1.0
    lo = brentq(lambda s: h(s) - Tsq, a, s_star, xtol=1e-13)
    b = s_star + 1.0
    while h(b) < Tsq:
        b += 1.0
    hi = brentq(lambda s: h(s) - Tsq, s_star, b, xtol=1e-13)
    lo = max(lo, C)
    if lo >= hi:
        return None
    return lo, hi


def rho_ball_volume(
    n: int,
    T: float,
    C: float = -math.inf,
    *,
    chirality: str = "right",
    epsrel: float = 1e-10,
) -> VolumeResult:
    """Invariant volume of the norm-T ball in the upper-triangular group,
    cut to the cone {s_i > C, i < n}.

    Nested adaptive quadrature over the free diagonal coordinates with
    exact feasibility intervals at every level.  The reported error adds
    the outer quadrature estimate and a conservative allowance for the
    inner levels.
    """
    _check_dim(n)
    if chirality not in ("right", "left"):
        raise ValueError(f"chirality must be 'right' or 'left', got {chirality!r}")
    if not (math.isfinite(T) and T > 0):
        raise ValueError(f"radius must be positive and finite, got {T!r}")
    if T * T <= n:
        return VolumeResult(value=0.0, error=0.0, n=n, T=T, C=C, chirality=chirality)
    kappa = 1.0 if chirality == "right" else -1.0
    Tsq = T * T
    half_m = 0.25 * n * (n - 1)
    inner_err = [0.0]

    def level(k: int, sigma: float, P: float, dpart: float):
        iv = _feasible_interval(n, k, sigma, P, Tsq, C)
        if iv is None:
            return 0.0
        lo, hi = iv
        if k == n - 1:

            def f(sk: float) -> float:
                rem = Tsq - (P + _exp(2.0 * sk) + _exp(-2.0 * (sigma + sk)))
                if rem <= 0.0:
                    return 0.0
                return rem**half_m * _exp(kappa * (dpart + sk))

        else:

            def f(sk: float) -> float:
                return level(k + 1, sigma + sk, P + _exp(2.0 * sk), dpart + (n - k) * sk)

        val, err = quad(f, lo, hi, epsabs=0.0, epsrel=epsrel, limit=200)[:2]
        if k > 1:
            inner_err[0] = max(inner_err[0], abs(err))
        return val

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        raw = level(1, 0.0, 0.0, 0.0)
    cn = ball_volume_constant(n)
    value = cn * raw
    # the outer quad error is unavailable separately from level(); bound the
    # total by the relative target plus the worst inner absolute error
    error = abs(value) * epsrel * 10.0 * (n - 1) + cn * inner_err[0]
    return VolumeResult(value=value, error=error, n=n, T=T, C=C, chirality=chirality)


def asymptotic_volume(n: int, T: float) -> float:
    """Leading term gamma_n * T^(n^2 - n), computed in log space."""
    if T <= 0:
        raise ValueError("radius must be positive")
    m = n * (n - 1) / 2.0
    lg = (m / 2.0) * math.log(math.pi) - (n - 1) * math.log(2.0)
    lg -= math.lgamma((n * n - n + 2) / 2.0)
    for k in range(1, n):
        lg += math.lgamma((n - k) / 2.0)
    return math.exp(lg + (n * n - n) * math.log(T))


def cone_fraction(n: int, T: float, C: float, *, epsrel: float = 1e-10) -> float:
    """Fraction of the right-invariant ball volume carried by the cone
    {s_i > C, i < n}; 1 when C is below the reachable range."""
    whole = rho_ball_volume(n, T, epsrel=epsrel)
    if whole.value == 0.0:
        raise ValueError(f"empty ball: T = {T} with n = {n}")
    part = rho_ball_volume(n, T, C, epsrel=epsrel)
    frac = part.value / whole.value
    return min(1.0, max(0.0, frac))


# ---------------------------------------------------------------------------
# sampling


@dataclass
class HaarBallSampler:
    """Rejection sampler for the invariant measures on a norm ball.

    The diagonal marginal density (after integrating t exactly) is
    exp(kappa delta(s)) (T^2 - N(s))^(m/2) on a convex domain; its log is
    strictly concave, so proposals drawn uniformly from the bounding box
    and accepted against the flat envelope at the mode height are exact.
    Given s, the t block is uniform in its ellipsoid, sampled by scaling
    a uniform point of the unit m-ball.
    """

    n: int
    T: float
    chirality: str = "right"
    _mode_height: float = field(init=False, repr=False)
    _box_lo: float = field(init=False, repr=False)
    _box_hi: float = field(init=False, repr=False)
    attempts: int = field(init=False, default=0, repr=False)
    accepts: int = field(init=False, default=0, repr=False)
    _warned: bool = field(init=False, default=False, repr=False)

    def __post_init__(self) -> None:
        _check_dim(self.n)
        if self.chirality not in ("right", "left"):
            raise ValueError(f"chirality must be 'right' or 'left', got {self.chirality!r}")
        if not (math.isfinite(self.T) and self.T * self.T > self.n):
            raise ValueError(f"radius {self.T!r} leaves an empty ball for n = {self.n}")
        n, T = self.n, self.T
        # T > sqrt(n) > 1 here, and the domain satisfies
        # -(n-1) log T < s_i < log T for every i
        logT = math.log(T)
        self._box_lo = -(n - 1) * logT
        self._box_hi = logT
        x0 = np.zeros(n - 1)

        def neg_log_density(s_free: np.ndarray) -> float:
            v = self._log_density_free(s_free)
            return 1e18 if not math.isfinite(v) else -v

        res = minimize(
            neg_log_density,
            x0,
            method="Nelder-Mead",
            options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000},
        )
        # small pad so optimizer slack cannot leave density above the envelope
        self._mode_height = -res.fun + 1e-9

    def _log_density_free(self, s_free: np.ndarray) -> float:
        """Unnormalised log density of the free diagonal coordinates."""
        n, Tsq = self.n, self.T * self.T
        kappa = 1.0 if self.chirality == "right" else -1.0
        tail = -float(np.sum(s_free))
        if np.max(s_free) > _EXP_CAP / 2 or tail > _EXP_CAP / 2:
            return -math.inf
        N = float(np.exp(2.0 * s_free).sum()) + math.exp(2.0 * tail)
        rem = Tsq - N
        if rem <= 0.0:
            return -math.inf
        weights = np.arange(n - 1, 0, -1, dtype=float)
        delta = float(np.dot(weights, s_free))
        return kappa * delta + 0.25 * n * (n - 1) * math.log(rem)

    def _log_density_batch(self, S: np.ndarray) -> np.ndarray:
        n, Tsq = self.n, self.T * self.T
        kappa = 1.0 if self.chirality == "right" else -1.0
        tail = -S.sum(axis=1)
        N = np.exp(2.0 * S).sum(axis=1) + np.exp(2.0 * tail)
        rem = Tsq - N
        out = np.full(S.shape[0], -np.inf)
        ok = rem > 0.0
        weights = np.arange(n - 1, 0, -1, dtype=float)
        out[ok] = kappa * (S[ok] @ weights) + 0.25 * n * (n - 1) * np.log(rem[ok])
        return out

    def sample_batch(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Draw `size` points; returns (S, t) with S of shape (size, n)
        including the dependent last coordinate and t of shape (size, m)."""
        n = self.n
        m = n * (n - 1) // 2
        got_s = np.empty((size, n - 1))
        have = 0
        while have < size:
            miss = size - have
            rate = max(self.accepts, 1) / max(self.attempts, 1)
            chunk = int(min(max(miss / rate * 1.2, 4096), 1 << 20))
            prop = rng.uniform(self._box_lo, self._box_hi, size=(chunk, n - 1))
            logu = np.log(rng.random(chunk))
            keep = logu <= self._log_density_batch(prop) - self._mode_height
            self.attempts += chunk
            kept = prop[keep]
            self.accepts += kept.shape[0]
            take = min(kept.shape[0], miss)
            got_s[have : have + take] = kept[:take]
            have += take
            if not self._warned and self.attempts > 10**6 and self.accepts / self.attempts < 1e-4:
                warnings.warn(
                    f"rejection efficiency {self.accepts / self.attempts:.2e} "
                    f"below 1e-4 for n={n}, T={self.T}, {self.chirality}",
                    RuntimeWarning,
                )
                self._warned = True
        S = np.concatenate([got_s, -got_s.sum(axis=1, keepdims=True)], axis=1)
        # uniform point of the unit m-ball, scaled into the t ellipsoid
        z = rng.standard_normal((size, m))
        z /= np.sqrt((z * z).sum(axis=1, keepdims=True))
        radii = rng.random(size) ** (1.0 / m)
        z *= radii[:, np.newaxis]
        rem = self.T * self.T - np.exp(2.0 * S).sum(axis=1)
        R = np.sqrt(rem)
        rows = np.array([i for i, _ in pair_indices(n)])
        t = z * R[:, np.newaxis] * np.exp(-S[:, rows])
        return S, t

    def acceptance_rate(self) -> float:
        return self.accepts / self.attempts if self.attempts else math.nan


def sample_haar_ball(sampler: HaarBallSampler, rng: np.random.Generator) -> BorelCoords:
    """One invariant-measure draw from the sampler's ball, as coordinates."""
    S, t = sampler.sample_batch(rng, 1)
    s = S[0]
    s = s - s.mean()  # exact zero-sum for the coordinate invariant
    return BorelCoords(s=s, t=t[0])
