import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from seqcs.errors import Infeasible, Unbounded
from seqcs.solvers.basis_pursuit import basis_pursuit, warm_start_add_row
from seqcs.solvers.simplex import LPStatus, solve_standard_form


def highs(c, A, b):
    return linprog(c, A_eq=A, b_eq=b, bounds=(0, None), method="highs")


def test_beale_cycling_example():
    # classic instance on which textbook Dantzig pricing cycles
    c = np.array([0, 0, 0, -0.75, 20, -0.5, 6.0])
    A = np.array([[1, 0, 0, 0.25, -8, -1, 9],
                  [0, 1, 0, 0.5, -12, -0.5, 3],
                  [0, 0, 1, 0, 0, 1, 0.0]])
    b = np.array([0, 0, 1.0])
    state = solve_standard_form(c, A, b)
    assert state.status is LPStatus.OPTIMAL
    assert state.objective == pytest.approx(highs(c, A, b).fun, abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 6), extra=st.integers(1, 8))
def test_matches_highs_on_bounded_feasible_lps(seed, m, extra):
    rng = np.random.default_rng(seed)
    n = m + extra
    A = rng.standard_normal((m, n))
    b = A @ rng.uniform(0, 1, n)  # feasible by construction
    c = rng.uniform(0.1, 1.0, n)  # positive costs keep it bounded
    ref = highs(c, A, b)
    state = solve_standard_form(c, A, b)
    assert state.objective == pytest.approx(ref.fun, rel=1e-7, abs=1e-9)
    x = state.primal()
    assert np.all(x >= 0)
    assert np.allclose(A @ x, b, atol=1e-8 * (1 + np.abs(b).max()))


def test_infeasible_detected():
    A = np.array([[1.0, 1.0]])
    with pytest.raises(Infeasible):
        solve_standard_form([1.0, 1.0], A, [-1.0])


def test_unbounded_detected():
    A = np.array([[1.0, -1.0]])
    with pytest.raises(Unbounded):
        solve_standard_form([0.0, -1.0], A, [1.0])


def test_redundant_row_dropped():
    A = np.array([[1.0, 1.0, 0.0], [2.0, 2.0, 0.0], [0.0, 1.0, 1.0]])
    state = solve_standard_form([1.0, 2.0, 1.0], A, [1.0, 2.0, 1.0])
    assert state.dropped_rows == 1
    assert state.objective == pytest.approx(highs([1, 2, 1], A, [1, 2, 1]).fun)


def test_bp_identity():
    y = np.array([1.5, -2.0, 0.0, 0.25])
    rep = basis_pursuit(np.eye(4), y)
    assert np.allclose(rep.solution, y)
    assert rep.objective == pytest.approx(np.abs(y).sum())


def test_bp_single_row():
    rep = basis_pursuit([[2.0, 1.0]], [2.0])
    assert np.allclose(rep.solution, [1.0, 0.0])
    assert rep.objective == pytest.approx(1.0)


def sparsest_feasible(A, y, max_k):
    """Exhaustive l0 oracle: every feasible point with support size <= max_k."""
    N = A.shape[1]
    found = []
    for k in range(max_k + 1):
        for S in itertools.combinations(range(N), k):
            x = np.zeros(N)
            if k:
                coef, *_ = np.linalg.lstsq(A[:, S], y, rcond=None)
                x[list(S)] = coef
            if np.linalg.norm(A @ x - y) <= 1e-9 * (1 + np.linalg.norm(y)):
                found.append(x)
        if found:
            return k, found
    return None, []


def test_bp_recovers_sparse_vs_l0_oracle():
    rng = np.random.default_rng(12)
    A = rng.standard_normal((6, 8))
    x = np.zeros(8)
    x[[1, 5]] = [1.3, -0.7]
    y = A @ x
    k, sols = sparsest_feasible(A, y, 2)
    assert k == 2 and len(sols) == 1 and np.allclose(sols[0], x)
    assert np.allclose(basis_pursuit(A, y).solution, x, atol=1e-7)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 12), extra=st.integers(0, 12))
def test_bp_support_and_split_properties(seed, M, extra):
    rng = np.random.default_rng(seed)
    N = M + extra
    A = rng.standard_normal((M, N))
    y = rng.standard_normal(M)
    rep = basis_pursuit(A, y)
    z = rep.state.primal()
    assert np.all(z[:N] * z[N:2 * N] == 0)
    assert np.count_nonzero(rep.solution) <= M
    assert np.allclose(A @ rep.solution, y, atol=1e-8 * (1 + np.abs(y).max()))
    ref = highs(np.ones(2 * N), np.hstack([A, -A]), y)
    assert rep.objective == pytest.approx(ref.fun, rel=1e-7)


def test_warm_duplicate_row_needs_no_pivots():
    rng = np.random.default_rng(13)
    A = rng.standard_normal((8, 20))
    y = rng.standard_normal(8)
    rep = basis_pursuit(A, y)
    warm = warm_start_add_row(rep.state, A[3], y[3])
    assert warm.phase2_iters == 0
    assert np.allclose(warm.solution, rep.solution)


def test_warm_matches_cold_sequence():
    rng = np.random.default_rng(14)
    N, K = 40, 4
    x = np.zeros(N)
    x[rng.choice(N, K, replace=False)] = rng.standard_normal(K)
    A = rng.standard_normal((30, N))
    y = A @ x
    rep = basis_pursuit(A[:9], y[:9])
    for M in range(10, 31):
        rep = warm_start_add_row(rep.state, A[M - 1], y[M - 1])
        cold = basis_pursuit(A[:M], y[:M])
        assert rep.objective == pytest.approx(cold.objective, abs=1e-7)


def test_literal_q_agrees_with_lexicographic():
    rng = np.random.default_rng(15)
    A = rng.standard_normal((12, 30))
    y = rng.standard_normal(12)
    rep = basis_pursuit(A[:11], y[:11])
    lex = warm_start_add_row(rep.state, A[11], y[11])
    lit = warm_start_add_row(rep.state, A[11], y[11], q_policy=1e4)
    assert lit.objective == pytest.approx(lex.objective, rel=1e-9)
    assert np.allclose(lit.solution, lex.solution, atol=1e-8)
