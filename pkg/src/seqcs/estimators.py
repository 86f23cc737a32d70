"""Reconstruction-error certificates from held-out measurements.

Two families:

* geometric: the distance ``d`` from a feasible reconstruction to the affine
  solution set of all ``M + T`` measurements, scaled by the random factor
  ``C_T`` whose moments live in :mod:`seqcs.stats`.  Needs the
  reconstruction to satisfy its own ``M`` measurements.
* chi-square: deviations ``z_i = row_i . x_hat - y_i`` on ``T`` fresh rows
  are i.i.d. normal with variance ``||delta||^2 * var + sigma_n^2`` for a
  Gaussian ensemble, so ``sum z_i^2`` gives an interval for the error.
  Works for any reconstruction, feasible or not, and with noise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegreesOfFreedom, InfeasibleReconstruction
from .linalg import affine_distance, as_matrix, as_vector
from .stats import chi2_quantile, ct_mean_bound, ct_mean_estimate, ct_var_bound

FEASIBILITY_RTOL = 1e-6


class Method(str, enum.Enum):
    CHEBYSHEV = "chebyshev_ct"
    CHI2 = "chi2"
    JL = "jl_style"


@dataclass(frozen=True)
class ErrorCertificate:
    point_estimate: float
    upper_bound: float
    confidence: float
    method: Method
    T: int
    noise_sigma: float = 0.0
    k: float | None = None
    alpha: float | None = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def covers(self, true_error: float, slack: float = 1e-9) -> bool:
        return true_error <= self.upper_bound + slack * (1.0 + self.upper_bound)


@dataclass(frozen=True)
class HoldoutBatch:
    """``T`` measurements drawn after the reconstruction was fixed."""

    rows: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        rows = as_matrix(self.rows)
        values = as_vector(self.values)
        if rows.shape[0] != values.shape[0]:
            raise ValueError("rows and values disagree in length")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "values", values)

    @property
    def T(self) -> int:
        return self.rows.shape[0]

    def deviations(self, x_hat) -> np.ndarray:
        return self.rows @ as_vector(x_hat) - self.values


def chebyshev_multiplier(L: int, T: int, k: float) -> float:
    """``sqrt((L-2)/(T-2)) + k sqrt((L-2)/(T-2) - L/T)``."""
    if k <= 0:
        raise ValueError("k must be positive")
    if T <= 2:
        raise DegreesOfFreedom(f"the Chebyshev certificate needs T > 2, got T={T}")
    return ct_mean_bound(L, T) + k * math.sqrt(max(ct_var_bound(L, T), 0.0))


def chebyshev_bound(d: float, L: int, T: int, k: float) -> ErrorCertificate:
    """Certificate from an already computed affine distance ``d``."""
    if d < 0:
        raise ValueError("distance must be nonnegative")
    mult = chebyshev_multiplier(L, T, k)
    return ErrorCertificate(
        point_estimate=ct_mean_estimate(L, T) * d,
        upper_bound=mult * d,
        confidence=1.0 - 1.0 / k**2,
        method=Method.CHEBYSHEV,
        T=T,
        k=k,
    )


def check_feasible(A_fit, y_fit, x_hat, rtol: float = FEASIBILITY_RTOL):
    if A_fit.shape[0] == 0:
        return
    resid = np.abs(A_fit @ x_hat - y_fit).max()
    scale = 1.0 + np.abs(y_fit).max()
    if resid > rtol * scale:
        raise InfeasibleReconstruction(
            f"reconstruction misses its own measurements by {resid:.3e}"
        )


def _split(A_all, y_all, x_hat, T):
    A_all = as_matrix(A_all)
    y_all = as_vector(y_all)
    x_hat = as_vector(x_hat)
    n_all, N = A_all.shape
    if not 1 <= T <= n_all:
        raise ValueError(f"T={T} outside [1, {n_all}]")
    M = n_all - T
    check_feasible(A_all[:M], y_all[:M], x_hat)
    return A_all, y_all, x_hat, M, N


def certify_chebyshev(A_all, y_all, x_hat, T: int, k: float = 3.0) -> ErrorCertificate:
    """Geometric certificate for ``x_hat`` fitted to the first ``M = rows - T`` rows."""
    A_all, y_all, x_hat, M, N = _split(A_all, y_all, x_hat, T)
    d = affine_distance(A_all, y_all, x_hat)
    return chebyshev_bound(d, N - M, T, k)


def sin_theta_point_estimate(A_all, y_all, x_hat, T: int, L: int | None = None) -> float:
    """``sqrt(L/T)`` times the distance to the solution set of all rows.

    The last ``T`` rows are the holdout; ``L`` defaults to ``N - M``.
    """
    A_all, y_all, x_hat, M, N = _split(A_all, y_all, x_hat, T)
    if L is None:
        L = N - M
    return ct_mean_estimate(L, T) * affine_distance(A_all, y_all, x_hat)


def chi2_interval(batch: HoldoutBatch, x_hat, alpha: float = 0.1, noise_sigma: float = 0.0,
                  entry_variance: float = 1.0, approximate: bool = False) -> ErrorCertificate:
    """Upper confidence bound on ``||x_hat - x*||`` from held-out deviations.

    ``Z = sum z_i^2``.  The bound is ``sqrt(Z / z_alpha - sigma_n^2)`` with
    ``z_alpha`` the ``alpha`` quantile of chi-square with ``T`` degrees of
    freedom; the point estimate is ``sqrt(Z / T - sigma_n^2)``.  Both are
    divided by the ensemble entry variance first.  Negative radicands are
    clamped to zero and flagged ``below_noise_floor``.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    if noise_sigma < 0 or entry_variance <= 0:
        raise ValueError("noise_sigma must be >= 0 and entry_variance > 0")
    z = batch.deviations(x_hat)
    return chi2_from_deviations(z, alpha, noise_sigma, entry_variance, approximate)


def chi2_from_deviations(z, alpha: float = 0.1, noise_sigma: float = 0.0,
                         entry_variance: float = 1.0, approximate: bool = False) -> ErrorCertificate:
    z = as_vector(z)
    T = z.shape[0]
    Z = float(z @ z)
    z_star = chi2_quantile(alpha, T)
    s2 = noise_sigma**2
    upper_sq = (Z / z_star - s2) / entry_variance
    point_sq = (Z / T - s2) / entry_variance
    flags = []
    if point_sq < 0 or upper_sq < 0:
        flags.append("below_noise_floor")
    if approximate:
        flags.append("approximate")
    return ErrorCertificate(
        point_estimate=math.sqrt(max(point_sq, 0.0)),
        upper_bound=math.sqrt(max(upper_sq, 0.0)),
        confidence=1.0 - alpha,
        method=Method.CHI2,
        T=T,
        noise_sigma=noise_sigma,
        alpha=alpha,
        flags=tuple(flags),
    )


def jl_style_estimate(batch: HoldoutBatch, x_hat) -> float:
    """``sqrt(Z/T)``: the root mean square deviation on the held-out rows."""
    return jl_from_deviations(batch.deviations(x_hat))


def jl_from_deviations(z) -> float:
    z = as_vector(z)
    return math.sqrt(float(z @ z) / z.shape[0])
