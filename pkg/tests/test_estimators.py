import math

import numpy as np
import pytest

from seqcs.errors import DegreesOfFreedom, InfeasibleReconstruction
from seqcs.estimators import (HoldoutBatch, Method, certify_chebyshev, chebyshev_bound, chebyshev_multiplier,
                              chi2_from_deviations, chi2_interval, jl_from_deviations, jl_style_estimate,
                              sin_theta_point_estimate)
from seqcs.linalg import min_norm_solution


def test_chebyshev_multiplier_value():
    assert chebyshev_multiplier(100, 10, 3) == pytest.approx(8.0)


def test_chebyshev_zero_distance():
    cert = chebyshev_bound(0.0, 100, 10, 3)
    assert cert.upper_bound == 0.0 and cert.point_estimate == 0.0
    assert cert.confidence == pytest.approx(8 / 9)
    assert cert.method is Method.CHEBYSHEV


def test_chebyshev_needs_dof():
    with pytest.raises(DegreesOfFreedom):
        chebyshev_bound(1.0, 100, 2, 3)


def test_chebyshev_bound_dominates_point():
    for T in (3, 5, 10, 50):
        cert = chebyshev_bound(0.7, 100, T, 1.5)
        assert cert.upper_bound >= cert.point_estimate


def test_certify_rejects_infeasible_fit():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((8, 20))
    y = rng.standard_normal(8)
    with pytest.raises(InfeasibleReconstruction):
        certify_chebyshev(A, y, np.zeros(20) + 1.0, T=4)


def test_chi2_zero_deviations():
    cert = chi2_from_deviations(np.zeros(10), alpha=0.1)
    assert cert.upper_bound == 0.0 and cert.point_estimate == 0.0
    assert cert.flags == ()


def test_chi2_noise_floor_flag():
    cert = chi2_from_deviations(np.full(10, 1e-4), alpha=0.1, noise_sigma=0.01)
    assert cert.point_estimate == 0.0
    assert "below_noise_floor" in cert.flags


def test_chi2_approximate_flag():
    assert "approximate" in chi2_from_deviations(np.ones(5), approximate=True).flags


def test_chi2_bad_alpha():
    batch = HoldoutBatch(np.eye(3), np.zeros(3))
    with pytest.raises(ValueError):
        chi2_interval(batch, np.zeros(3), alpha=1.0)


def test_scale_equivariance():
    z = np.random.default_rng(1).standard_normal(12)
    a, b = chi2_from_deviations(z), chi2_from_deviations(2.5 * z)
    assert b.upper_bound == pytest.approx(2.5 * a.upper_bound)
    assert b.point_estimate == pytest.approx(2.5 * a.point_estimate)
    assert jl_from_deviations(2.5 * z) == pytest.approx(2.5 * jl_from_deviations(z))


def test_jl_constant_deviations():
    assert jl_from_deviations(np.full(7, -0.3)) == pytest.approx(0.3)
    batch = HoldoutBatch(np.eye(4), np.zeros(4))
    assert jl_style_estimate(batch, np.full(4, 2.0)) == pytest.approx(2.0)


def test_sin_theta_exact_fit_is_zero():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((30, 50))
    x = rng.standard_normal(50)
    assert sin_theta_point_estimate(A, A @ x, x, T=10) == pytest.approx(0.0, abs=1e-9)


def test_sin_theta_no_fit_rows():
    rng = np.random.default_rng(3)
    N, T = 40, 6
    A = rng.standard_normal((T, N))
    x_hat = rng.standard_normal(N)
    proj = A.T @ np.linalg.solve(A @ A.T, A @ x_hat)
    expected = math.sqrt(N / T) * np.linalg.norm(proj)
    assert sin_theta_point_estimate(A, np.zeros(T), x_hat, T=T) == pytest.approx(expected, rel=1e-9)


def test_sin_theta_calibrated_mean():
    rng = np.random.default_rng(4)
    N, M, T = 250, 200, 25
    vals = []
    for _ in range(400):
        A = rng.standard_normal((M + T, N))
        # unit-norm error lying in the null space of the fit rows, so x_hat = delta is feasible for y = 0
        v = rng.standard_normal(N)
        v -= min_norm_solution(A[:M], A[:M] @ v)
        v /= np.linalg.norm(v)
        vals.append(sin_theta_point_estimate(A, np.zeros(M + T), v, T=T))
    mean = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(len(vals)))
    assert abs(mean - 1.0) <= 0.05 + 3 * se


def test_chi2_coverage_fixed_delta():
    rng = np.random.default_rng(5)
    N, T = 60, 25
    delta = rng.standard_normal(N)
    delta /= np.linalg.norm(delta)
    hits = 0
    n = 2000
    for _ in range(n):
        z = rng.standard_normal((T, N)) @ delta
        hits += chi2_from_deviations(z, alpha=0.1).covers(1.0)
    cover = hits / n
    assert cover >= 0.9 - 3 * math.sqrt(0.09 / n)


def test_chi2_point_estimate_large_T():
    rng = np.random.default_rng(6)
    z = rng.standard_normal(400)
    assert chi2_from_deviations(z).point_estimate == pytest.approx(1.0, rel=0.05)
