"""Chi-square kernel and Monte Carlo checks on the holdout amplification factor.

The amplification factor is ``C_T = ||h|| / ||h[:T]||`` for ``h`` standard
normal in ``R^L``: the reciprocal sine of the angle between a fixed vector
and a uniformly random ``(L - T)``-dimensional subspace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceFailure, DegreesOfFreedom

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 10_000


def _gamma_p_series(a: float, x: float) -> float:
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise ConvergenceFailure(f"incomplete gamma series did not converge (a={a}, x={x})")


def _gamma_q_contfrac(a: float, x: float) -> float:
    # modified Lentz evaluation
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise ConvergenceFailure(f"incomplete gamma continued fraction did not converge (a={a}, x={x})")


def regularized_gamma_p(a: float, x: float) -> float:
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0:
        raise ValueError("a must be positive")
    if x < 0:
        raise ValueError("x must be nonnegative")
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_p_series(a, x))
    return max(0.0, 1.0 - _gamma_q_contfrac(a, x))


def chi2_cdf(x: float, T: int) -> float:
    if T < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if x < 0:
        raise ValueError("x must be nonnegative")
    return regularized_gamma_p(0.5 * T, 0.5 * x)


def chi2_pdf(x: float, T: int) -> float:
    if x < 0:
        return 0.0
    k = 0.5 * T
    if x == 0.0:
        if T == 1:
            return math.inf
        return 0.5 if T == 2 else 0.0
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_quantile(p: float, T: int, tol: float = 1e-12, max_iter: int = 200) -> float:
    """Inverse of :func:`chi2_cdf` by safeguarded Newton iteration inside a bracket."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if T < 1:
        raise ValueError("degrees of freedom must be >= 1")
    lo, hi = 0.0, max(1.0, float(T))
    while chi2_cdf(hi, T) < p:
        lo, hi = hi, 2.0 * hi
        if hi > 1e8:
            raise ConvergenceFailure("could not bracket the quantile")
    # Wilson-Hilferty start, clipped into the bracket
    z = math.sqrt(2.0) * _erfinv(2.0 * p - 1.0)
    h = 2.0 / (9.0 * T)
    x = T * max(1.0 - h + z * math.sqrt(h), 1e-3) ** 3
    if not lo < x < hi:
        x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        f = chi2_cdf(x, T) - p
        if abs(f) <= tol:
            return x
        if f < 0:
            lo = x
        else:
            hi = x
        dens = chi2_pdf(x, T)
        step_ok = False
        if dens > 0 and math.isfinite(dens):
            x_new = x - f / dens
            step_ok = lo < x_new < hi
        x = x_new if step_ok else 0.5 * (lo + hi)
        if hi - lo <= 1e-15 * max(1.0, hi):
            return x
    if abs(chi2_cdf(x, T) - p) <= 1e-9:
        return x
    raise ConvergenceFailure(f"chi2_quantile(p={p}, T={T}) did not converge")


def _erfinv(y: float) -> float:
    # a few Newton steps on erf from a crude start; only used to seed the solver
    if y <= -1.0:
        return -6.0
    if y >= 1.0:
        return 6.0
    x = 0.0
    for _ in range(60):
        err = math.erf(x) - y
        deriv = 2.0 / math.sqrt(math.pi) * math.exp(-x * x)
        if deriv < 1e-300:
            break
        x = max(-6.0, min(6.0, x - err / deriv))
        if abs(err) < 1e-15:
            break
    return x


# closed forms for the amplification factor C_T

def ct_mean_estimate(L: int, T: int) -> float:
    if not L >= T >= 1:
        raise ValueError(f"need L >= T >= 1, got L={L}, T={T}")
    return math.sqrt(L / T)


def ct_second_moment(L: int, T: int) -> float:
    """``E[C_T**2] = (L - 2) / (T - 2)``; defined only for ``T > 2``."""
    if T <= 2:
        raise DegreesOfFreedom(f"E[C_T^2] is infinite for T={T} <= 2")
    if L < T:
        raise ValueError(f"need L >= T, got L={L}, T={T}")
    return (L - 2) / (T - 2)


def ct_mean_bound(L: int, T: int) -> float:
    return math.sqrt(ct_second_moment(L, T))


def ct_var_bound(L: int, T: int) -> float:
    return ct_second_moment(L, T) - L / T


@dataclass(frozen=True)
class MomentReport:
    sample_mean: float
    sample_var: float
    count: int
    target: float | None = None
    target_var: float | None = None
    label: str = ""

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("a moment report needs at least two samples")

    @property
    def sample_std(self) -> float:
        return math.sqrt(self.sample_var)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.sample_var / self.count)

    @property
    def var_std_error(self) -> float:
        # normal-theory standard error of the sample variance
        return self.sample_var * math.sqrt(2.0 / (self.count - 1))

    @property
    def abs_deviation(self) -> float | None:
        return None if self.target is None else abs(self.sample_mean - self.target)

    @property
    def rel_deviation(self) -> float | None:
        if self.target is None:
            return None
        return abs(self.sample_mean - self.target) / abs(self.target)

    @classmethod
    def from_samples(cls, samples, target=None, target_var=None, label="") -> "MomentReport":
        s = np.asarray(samples, dtype=float)
        return cls(
            sample_mean=float(s.mean()),
            sample_var=float(s.var(ddof=1)),
            count=int(s.size),
            target=target,
            target_var=target_var,
            label=label,
        )


def _sin2_samples(L: int, T: int, n_samples: int, seed) -> np.ndarray:
    if not L >= T >= 1:
        raise ValueError(f"need L >= T >= 1, got L={L}, T={T}")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    rng = np.random.default_rng(seed)
    out = np.empty(n_samples)
    # chunked to bound memory for large L * n_samples
    chunk = max(1, 2_000_000 // L)
    for start in range(0, n_samples, chunk):
        stop = min(n_samples, start + chunk)
        h2 = rng.standard_normal((stop - start, L)) ** 2
        head = h2[:, :T].sum(axis=1)
        if T == L:
            out[start:stop] = 1.0
        else:
            out[start:stop] = head / (head + h2[:, T:].sum(axis=1))
    return out


def sample_ct(L: int, T: int, n_samples: int = 5000, seed=0) -> MomentReport:
    """Monte Carlo moments of ``C_T``; the target is ``sqrt(L/T)``, the variance target the bound."""
    if n_samples < 100:
        raise ValueError("sample_ct needs at least 100 samples")
    ct = 1.0 / np.sqrt(_sin2_samples(L, T, n_samples, seed))
    target_var = ct_var_bound(L, T) if T > 2 else None
    return MomentReport.from_samples(ct, target=ct_mean_estimate(L, T), target_var=target_var, label="C_T")


def sample_ct_values(L: int, T: int, n_samples: int, seed=0) -> np.ndarray:
    return 1.0 / np.sqrt(_sin2_samples(L, T, n_samples, seed))


def verify_sin2_identities(L: int, T: int, n_samples: int = 100_000, seed=0) -> tuple[MomentReport, MomentReport]:
    """Monte Carlo ``E[sin^2]`` against ``T/L`` and ``E[1/sin^2]`` against ``(L-2)/(T-2)``."""
    s2 = _sin2_samples(L, T, n_samples, seed)
    first = MomentReport.from_samples(s2, target=T / L, label="sin2")
    second = MomentReport.from_samples(1.0 / s2, target=ct_second_moment(L, T), label="inv_sin2")
    return first, second
