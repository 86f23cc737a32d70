import itertools
import math

import numpy as np
import pytest

from seqcs.errors import IterationLimit, NoProgress
from seqcs.solvers.bpdn import bpdn, lambda_schedule, objective, optimality_residual, soft_threshold
from seqcs.solvers.omp import omp


def test_lambda_schedule_value():
    assert lambda_schedule(100, 1000, 1.0) == pytest.approx(math.sqrt(100 * math.log(1000)))
    assert lambda_schedule(100, 1000, 1.0) == pytest.approx(26.2826, abs=1e-4)


def test_lambda_schedule_doubles_with_four_times_m():
    assert lambda_schedule(400, 50, 0.3) == pytest.approx(2 * lambda_schedule(100, 50, 0.3))


def test_bpdn_large_lambda_gives_zero():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((10, 30))
    y = rng.standard_normal(10)
    lam = np.abs(A.T @ y).max()
    assert not bpdn(A, y, lam).any()


def test_bpdn_identity_is_soft_threshold():
    y = np.array([3.0, -0.2, -1.5, 0.0, 0.9])
    x = bpdn(np.eye(5), y, 0.5)
    expected = np.sign(y) * np.maximum(np.abs(y) - 0.5, 0)
    assert np.allclose(x, expected, atol=1e-9)
    assert np.allclose(soft_threshold(y, 0.5), expected)


def test_bpdn_matches_long_run_reference():
    rng = np.random.default_rng(1)
    A = rng.standard_normal((50, 200))
    x0 = np.zeros(200)
    x0[rng.choice(200, 8, replace=False)] = rng.standard_normal(8)
    y = A @ x0 + 0.01 * rng.standard_normal(50)
    lam = 0.5
    x = bpdn(A, y, lam, tol=1e-9, max_iter=50_000)
    ref = bpdn(A, y, lam, tol=1e-10, max_iter=500_000)
    assert optimality_residual(A, y, x, lam) <= 1e-9
    assert objective(A, y, x, lam) == pytest.approx(objective(A, y, ref, lam), rel=1e-6)


def test_bpdn_iteration_limit():
    rng = np.random.default_rng(2)
    A = rng.standard_normal((40, 100))
    y = rng.standard_normal(40)
    with pytest.raises(IterationLimit):
        bpdn(A, y, 0.01, tol=1e-14, max_iter=3, polish_every=1000)


def test_bpdn_rejects_nonpositive_lambda():
    with pytest.raises(ValueError):
        bpdn(np.eye(2), np.ones(2), 0.0)


def test_omp_zero_observation():
    assert not omp(np.random.default_rng(3).standard_normal((5, 9)), np.zeros(5)).any()


def test_omp_orthonormal():
    Q, _ = np.linalg.qr(np.random.default_rng(4).standard_normal((6, 6)))
    y = np.random.default_rng(5).standard_normal(6)
    assert np.allclose(omp(Q, y), Q.T @ y, atol=1e-10)
    x = omp(Q, 2.5 * Q[:, 0])
    assert np.allclose(x, 2.5 * np.eye(6)[0], atol=1e-12)


def test_omp_recovers_support_vs_l0_oracle():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((20, 50))
    x = np.zeros(50)
    S = [4, 17, 33]
    x[S] = [3.0, -2.0, 1.0]
    y = A @ x
    # exhaustive oracle over supports of size <= 3: the planted one is the only consistent one
    hits = []
    for k in range(1, 4):
        for T in itertools.combinations(range(50), k):
            coef, *_ = np.linalg.lstsq(A[:, T], y, rcond=None)
            if np.linalg.norm(A[:, T] @ coef - y) <= 1e-9:
                hits.append(T)
    assert hits == [tuple(S)]
    x_hat = omp(A, y)
    assert set(np.flatnonzero(np.abs(x_hat) > 1e-9)) == set(S)
    assert np.allclose(x_hat, x, atol=1e-9)


def test_omp_no_progress_when_atoms_run_out():
    A = np.array([[1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
    with pytest.raises(NoProgress):
        omp(A, np.array([0.0, 1.0, 0.0]))
