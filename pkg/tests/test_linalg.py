import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from seqcs.errors import RankDeficient, ZeroColumn
from seqcs.linalg import affine_distance, as_matrix, min_norm_solution, mutual_coherence, nullspace_basis


def normal_equations(A, b):
    return A.T @ np.linalg.solve(A @ A.T, b)


def test_min_norm_identity():
    assert np.allclose(min_norm_solution(np.eye(3), [1, 2, 3]), [1, 2, 3])


def test_min_norm_symmetric_split():
    assert np.allclose(min_norm_solution([[1.0, 1.0]], [2.0]), [1.0, 1.0])


def test_min_norm_matches_normal_equations():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((3, 5))
    b = rng.standard_normal(3)
    assert np.allclose(min_norm_solution(A, b), normal_equations(A, b), atol=1e-9)


def test_min_norm_empty_system():
    assert np.array_equal(min_norm_solution(np.zeros((0, 4)), np.zeros(0)), np.zeros(4))


def test_rank_deficient_rows():
    A = np.array([[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])
    with pytest.raises(RankDeficient):
        min_norm_solution(A, [1.0, 2.0])


def test_more_rows_than_columns():
    with pytest.raises(RankDeficient):
        affine_distance(np.ones((3, 2)), np.zeros(3), np.zeros(2))


def test_non_finite_rejected():
    with pytest.raises(ValueError):
        as_matrix([[1.0, np.nan]])


def test_affine_distance_feasible_point():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 9))
    x = rng.standard_normal(9)
    assert affine_distance(A, A @ x, x) == pytest.approx(0.0, abs=1e-12)


def test_affine_distance_plane():
    assert affine_distance([[1.0, 0.0]], [0.0], [3.0, 7.0]) == pytest.approx(3.0)


def test_affine_distance_projection_oracle():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((5, 20))
    y = rng.standard_normal(5)
    x_hat = rng.standard_normal(20)
    # nearest point of {Ax = y} to x_hat is x_hat + min-norm solution of A d = y - A x_hat
    d = normal_equations(A, y - A @ x_hat)
    nearest = x_hat + d
    assert np.allclose(A @ nearest, y)
    assert affine_distance(A, y, x_hat) == pytest.approx(np.linalg.norm(d), rel=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 8), extra=st.integers(0, 8))
def test_affine_distance_row_permutation_invariant(seed, M, extra):
    rng = np.random.default_rng(seed)
    N = M + extra + 1
    A = rng.standard_normal((M, N))
    y = rng.standard_normal(M)
    x = rng.standard_normal(N)
    perm = rng.permutation(M)
    a, b = affine_distance(A, y, x), affine_distance(A[perm], y[perm], x)
    assert b == pytest.approx(a, rel=1e-9, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 6), extra=st.integers(1, 8))
def test_affine_distance_zero_iff_consistent(seed, M, extra):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((M, M + extra))
    x = rng.standard_normal(M + extra)
    y = A @ x
    assert affine_distance(A, y, x) <= 1e-9
    y_off = y.copy()
    y_off[0] += 1.0
    assert affine_distance(A, y_off, x) > 1e-6


def test_nullspace_basis_orthonormal_and_annihilated():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((4, 10))
    V = nullspace_basis(A)
    assert V.shape == (10, 6)
    assert np.allclose(V.T @ V, np.eye(6), atol=1e-12)
    assert np.abs(A @ V).max() < 1e-12


def test_coherence_identity_and_duplicate():
    assert mutual_coherence(np.eye(3)) == 0.0
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]])
    assert mutual_coherence(A) == pytest.approx(1.0)


def test_coherence_double_loop_oracle():
    rng = np.random.default_rng(10)
    A = rng.standard_normal((10, 30))
    best = 0.0
    for i, j in itertools.combinations(range(30), 2):
        ai, aj = A[:, i], A[:, j]
        best = max(best, abs(ai @ aj) / (np.linalg.norm(ai) * np.linalg.norm(aj)))
    assert mutual_coherence(A) == pytest.approx(best, rel=1e-12)


def test_coherence_zero_column():
    with pytest.raises(ZeroColumn):
        mutual_coherence(np.array([[1.0, 0.0], [1.0, 0.0]]))
