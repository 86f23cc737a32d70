"""Noiseless basis pursuit ``min ||x||_1  s.t.  A x = y`` as a standard-form LP.

The split ``x = x_plus - x_minus`` with both parts nonnegative turns the
problem into ``min 1'x_plus + 1'x_minus`` over ``[A  -A]``.  Columns ``j`` and
``N + j`` are negatives of each other, so they are never basic together and
the recovered ``x`` has at most ``M`` nonzeros.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..linalg import as_matrix, as_vector
from .simplex import LPStatus, SimplexState, add_row_warm, solve_standard_form


@dataclass
class SolveReport:
    solution: np.ndarray
    objective: float
    phase1_iters: int
    phase2_iters: int
    status: LPStatus
    state: SimplexState | None = None
    fallback: bool = False

    @property
    def iterations(self) -> tuple[int, int]:
        return self.phase1_iters, self.phase2_iters

    @property
    def total_iters(self) -> int:
        return self.phase1_iters + self.phase2_iters


def _report(state: SimplexState, N: int) -> SolveReport:
    z = state.primal()
    x = z[:N] - z[N:2 * N]
    return SolveReport(
        solution=x,
        objective=float(np.abs(x).sum()),
        phase1_iters=state.phase1_iters,
        phase2_iters=state.phase2_iters,
        status=state.status,
        state=state,
        fallback=state.fallback,
    )


def split_matrix(A: np.ndarray) -> np.ndarray:
    return np.hstack([A, -A])


def basis_pursuit(A, y, max_iter: int | None = None) -> SolveReport:
    """Cold two-phase simplex solve; the returned report carries the state for warm starts."""
    A = as_matrix(A)
    y = as_vector(y)
    M, N = A.shape
    if y.shape[0] != M:
        raise ValueError(f"y has length {y.shape[0]}, expected {M}")
    if M > N:
        raise ValueError(f"basis pursuit expects M <= N, got {M} x {N}")
    state = solve_standard_form(np.ones(2 * N), split_matrix(A), y, max_iter=max_iter)
    return _report(state, N)


def warm_start_add_row(state: SimplexState, new_row, new_y: float, q_policy="lexicographic",
                       max_iter: int | None = None) -> SolveReport:
    """Add one measurement to a solved basis pursuit problem and re-optimize.

    ``q_policy`` is ``"lexicographic"`` (symbolic big-M) or a positive float
    used as a literal slack cost.
    """
    row = as_vector(new_row)
    N = state.n_cols // 2
    if row.shape[0] != N:
        raise ValueError(f"row has length {row.shape[0]}, expected {N}")
    q_cost = None if q_policy == "lexicographic" else float(q_policy)
    new_state = add_row_warm(state, np.concatenate([row, -row]), float(new_y), q_cost=q_cost,
                             max_iter=max_iter)
    return _report(new_state, N)


class SequentialBasisPursuit:
    """Basis pursuit decoder fed one measurement at a time.

    ``warm=True`` re-optimizes from the previous basis; otherwise every solve
    starts from scratch.  Rows added with :meth:`add` are folded in lazily by
    the next :meth:`solve`.
    """

    def __init__(self, N: int, warm: bool = True):
        self.N = N
        self.warm = warm
        self.rows: list[np.ndarray] = []
        self.values: list[float] = []
        self._state: SimplexState | None = None
        self._absorbed = 0
        self.last_report: SolveReport | None = None
        self.total_pivots = 0

    def add(self, row, value: float):
        self.rows.append(np.asarray(row, dtype=float))
        self.values.append(float(value))

    @property
    def M(self) -> int:
        return len(self.rows)

    def solve(self) -> np.ndarray:
        if self.M == 0:
            return np.zeros(self.N)
        if self.M > self.N:
            raise ValueError("more measurements than unknowns; basis pursuit is determined")
        if not self.warm or self._state is None:
            rep = basis_pursuit(np.array(self.rows), np.array(self.values))
            self.total_pivots += rep.total_iters
        else:
            rep = self.last_report
            for k in range(self._absorbed, self.M):
                rep = warm_start_add_row(self._state, self.rows[k], self.values[k])
                self._state = rep.state
                self.total_pivots += rep.total_iters
        self._state = rep.state
        self._absorbed = self.M
        self.last_report = rep
        return rep.solution
