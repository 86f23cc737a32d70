"""Revised primal simplex for standard-form LPs ``min c'x  s.t.  Ax = b, x >= 0``.

Two entry points:

* :func:`solve_standard_form` -- classic two-phase cold start (artificial
  variables with unit cost in phase 1).
* :func:`add_row_warm` -- append one equality row to a solved problem and
  re-optimize from the previous optimal basis.  The new row gets a slack
  ``z >= 0`` whose sign makes the old solution feasible; ``z`` carries a
  big-M cost realized lexicographically (the slack tier is minimized first,
  the original cost breaks ties), so no huge constant ever enters the
  arithmetic.

Pricing is Dantzig (most negative reduced cost) and drops to Bland's rule
after ``STALL_LIMIT`` consecutive degenerate pivots, returning to Dantzig on
the next pivot that makes progress.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..errors import Infeasible, IterationLimit, SlackStuck, Unbounded

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-9
COST_TOL = 1e-9
DEGENERATE_STEP = 1e-12
# a reduced cost this negative (scaled like COST_TOL) is trusted even when
# the ratio test finds no leaving row, i.e. the LP really is unbounded
UNBOUNDED_COST = 1e-6
STALL_LIMIT = 50
REFACTOR_EVERY = 50


class LPStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


def iteration_cap(m: int, n: int) -> int:
    return 50 * (m + n)


@dataclass
class SimplexState:
    """An optimal (or terminated) basis for ``min c'x, Ax = b, x >= 0``.

    ``A`` and ``b`` are the rows as stored by the solver: rows may have been
    negated (phase 1 wants ``b >= 0``) and linearly dependent rows dropped.
    """

    A: np.ndarray
    b: np.ndarray
    c: np.ndarray
    basis: np.ndarray
    x_basic: np.ndarray
    B_inv: np.ndarray
    status: LPStatus = LPStatus.OPTIMAL
    phase1_iters: int = 0
    phase2_iters: int = 0
    dropped_rows: int = 0
    fallback: bool = False

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    @property
    def n_cols(self) -> int:
        return self.A.shape[1]

    def primal(self) -> np.ndarray:
        x = np.zeros(self.n_cols)
        x[self.basis] = np.maximum(self.x_basic, 0.0)
        return x

    @property
    def objective(self) -> float:
        return float(self.c @ self.primal())


class _Workspace:
    """Basis bookkeeping with an explicit inverse kept current by eta updates."""

    def __init__(self, A, b, basis, B_inv=None):
        self.A = A
        self.b = b
        self.basis = np.asarray(basis, dtype=int).copy()
        self.since_refactor = 0
        self.a_max = float(np.abs(A).max(initial=0.0))
        if B_inv is None:
            self.refactor()
        else:
            self.B_inv = B_inv.copy()
            self.x = self.B_inv @ b

    def refactor(self):
        B = self.A[:, self.basis]
        self.B_inv = np.linalg.inv(B)
        self.x = np.linalg.solve(B, self.b)
        self.since_refactor = 0

    def polish(self):
        self.refactor()
        small = (self.x < 0) & (self.x > -FEAS_TOL * (1.0 + np.abs(self.b).max(initial=0.0)))
        self.x[small] = 0.0

    def column(self, j: int) -> np.ndarray:
        return self.B_inv @ self.A[:, j]

    def pivot(self, j: int, r: int, u: np.ndarray) -> float:
        step = self.x[r] / u[r]
        self.x -= step * u
        self.x[r] = step
        row = self.B_inv[r] / u[r]
        self.B_inv -= np.outer(u, row)
        self.B_inv[r] = row
        self.basis[r] = j
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()
        return step

    def entering(self, tiers, eligible, bland: bool):
        """Lexicographic pricing over the cost tiers; None when optimal.

        Reduced costs are trusted to ``COST_TOL`` times the scale of the
        multipliers, which grows with the conditioning of the basis.
        """
        undecided = eligible.copy()
        improving = np.zeros_like(eligible)
        first_choice = None
        for c in tiers:
            if not undecided.any():
                break
            pi = c[self.basis] @ self.B_inv
            d = c - pi @ self.A
            scale = 1.0 + np.abs(c).max(initial=0.0) + np.abs(pi).max(initial=0.0) * self.a_max
            tol = COST_TOL * scale
            neg = undecided & (d < -tol)
            if neg.any():
                if first_choice is None:
                    idx = np.flatnonzero(neg)
                    first_choice = int(idx[np.argmin(d[idx])])
                improving |= neg
            undecided &= np.abs(d) <= tol
        if first_choice is None:
            return None
        if bland:
            return int(np.flatnonzero(improving)[0])
        return first_choice

    def leaving(self, u: np.ndarray, bland: bool):
        pos = np.flatnonzero(u > PIVOT_TOL)
        if pos.size == 0:
            return None
        ratios = np.maximum(self.x[pos], 0.0) / u[pos]
        best = ratios.min()
        ties = pos[ratios <= best + DEGENERATE_STEP]
        if bland:
            return int(ties[np.argmin(self.basis[ties])])
        return int(ties[np.argmax(u[ties])])

    def _first_tier_cost(self, tiers, j: int) -> tuple[float, float]:
        for c in tiers:
            pi = c[self.basis] @ self.B_inv
            d = float(c[j] - pi @ self.A[:, j])
            scale = 1.0 + np.abs(c).max(initial=0.0) + np.abs(pi).max(initial=0.0) * self.a_max
            if abs(d) > COST_TOL * scale:
                return d, scale
        return 0.0, 1.0

    def run(self, tiers, allowed, max_iter: int) -> tuple[LPStatus, int]:
        iters = 0
        stall = 0
        # columns whose ratio test failed on a fresh inverse: their negative
        # reduced cost is rounding noise; they are skipped until the next pivot
        rejected = np.zeros(allowed.shape, dtype=bool)
        while True:
            eligible = allowed & ~rejected
            eligible[self.basis] = False
            j = self.entering(tiers, eligible, stall >= STALL_LIMIT)
            if j is None:
                return LPStatus.OPTIMAL, iters
            if iters >= max_iter:
                return LPStatus.ITERATION_LIMIT, iters
            u = self.column(j)
            r = self.leaving(u, stall >= STALL_LIMIT)
            if r is None:
                if self.since_refactor:
                    self.refactor()
                    continue
                d, scale = self._first_tier_cost(tiers, j)
                if d < -UNBOUNDED_COST * scale:
                    return LPStatus.UNBOUNDED, iters
                rejected[j] = True
                continue
            step = self.pivot(j, r, u)
            rejected[:] = False
            iters += 1
            stall = stall + 1 if abs(step) <= DEGENERATE_STEP else 0

    def pivot_out(self, r: int, candidates: np.ndarray) -> bool:
        """Degenerate pivot removing ``basis[r]`` in favour of some candidate column."""
        cols = np.flatnonzero(candidates)
        cols = cols[~np.isin(cols, self.basis)]
        if cols.size == 0:
            return False
        row = self.B_inv[r] @ self.A[:, cols]
        k = int(np.argmax(np.abs(row)))
        if abs(row[k]) <= 1e-7 * max(1.0, np.abs(self.A[:, cols]).max()):
            return False
        j = int(cols[k])
        self.pivot(j, r, self.column(j))
        return True

    def drop_row(self, r: int):
        keep = np.arange(self.A.shape[0]) != r
        self.A = self.A[keep]
        self.b = self.b[keep]
        self.basis = self.basis[keep]
        self.refactor()


def _raise_for(status: LPStatus, what: str):
    if status is LPStatus.UNBOUNDED:
        raise Unbounded(f"{what}: objective unbounded below")
    if status is LPStatus.ITERATION_LIMIT:
        raise IterationLimit(f"{what}: pivot cap exceeded")


def solve_standard_form(c, A, b, max_iter: int | None = None) -> SimplexState:
    """Two-phase cold solve of ``min c'x  s.t.  Ax = b, x >= 0``."""
    c = np.asarray(c, dtype=float)
    A = np.array(A, dtype=float, copy=True)
    b = np.array(b, dtype=float, copy=True)
    m, n = A.shape
    if c.shape != (n,) or b.shape != (m,):
        raise ValueError("inconsistent LP dimensions")
    cap = iteration_cap(m, n) if max_iter is None else max_iter

    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    # phase 1 on [A | I] from the all-artificial basis
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    structural = np.zeros(n + m, dtype=bool)
    structural[:n] = True
    ws = _Workspace(A1, b, np.arange(n, n + m), B_inv=np.eye(m))
    status, it1 = ws.run([c1], structural, cap)
    _raise_for(status, "phase 1")
    ws.polish()
    infeas = float(c1[ws.basis] @ ws.x)
    if infeas > 1e-7 * (1.0 + np.abs(b).max(initial=0.0)):
        raise Infeasible(f"equality constraints are inconsistent (phase-1 residual {infeas:.3e})")

    dropped = 0
    r = 0
    while r < ws.basis.size:
        if ws.basis[r] >= n:
            if not ws.pivot_out(r, structural):
                ws.drop_row(r)
                dropped += 1
                continue
        r += 1
    ws.polish()

    ws2 = _Workspace(ws.A[:, :n], ws.b, ws.basis)
    status, it2 = ws2.run([c], np.ones(n, dtype=bool), max(cap - it1, 0))
    _raise_for(status, "phase 2")
    ws2.polish()
    return SimplexState(
        A=ws2.A, b=ws2.b, c=c, basis=ws2.basis, x_basic=ws2.x, B_inv=ws2.B_inv,
        status=LPStatus.OPTIMAL, phase1_iters=it1, phase2_iters=it2, dropped_rows=dropped,
    )


def add_row_warm(state: SimplexState, row, rhs: float, q_cost: float | None = None,
                 max_iter: int | None = None) -> SimplexState:
    """Re-optimize after appending ``row @ x = rhs`` to a solved problem.

    The appended row reads ``row @ x + s z = rhs`` with ``s = -1`` when the
    previous optimum overshoots (``row @ x > rhs``) and ``s = +1`` otherwise,
    so ``z = |row @ x - rhs|`` completes a basic feasible solution.  With
    ``q_cost=None`` the slack cost is lexicographic; a float gives a literal
    big-M objective ``c'x + q_cost * z``.
    """
    if state.status is not LPStatus.OPTIMAL:
        raise ValueError("warm start needs an optimal state")
    row = np.asarray(row, dtype=float)
    m, n = state.A.shape
    if row.shape != (n,):
        raise ValueError(f"row must have {n} entries")
    cap = iteration_cap(m + 1, n + 1) if max_iter is None else max_iter

    x_prev = state.primal()
    gap = float(row @ x_prev - rhs)
    s = -1.0 if gap >= 0 else 1.0

    A2 = np.zeros((m + 1, n + 1))
    A2[:m, :n] = state.A
    A2[m, :n] = row
    A2[m, n] = s
    b2 = np.append(state.b, rhs)
    basis2 = np.append(state.basis, n)
    # block inverse of [[B, 0], [r_B, s]]
    B_inv2 = np.zeros((m + 1, m + 1))
    B_inv2[:m, :m] = state.B_inv
    B_inv2[m, :m] = -(row[state.basis] @ state.B_inv) / s
    B_inv2[m, m] = 1.0 / s

    ws = _Workspace(A2, b2, basis2, B_inv=B_inv2)
    resid = np.abs(A2[:, basis2] @ ws.x - b2).max()
    if not np.all(np.isfinite(ws.x)) or resid > 1e-6 * (1.0 + np.abs(b2).max()):
        return _cold_fallback(state, row, rhs)

    c_full = np.append(state.c, 0.0)
    if q_cost is None:
        c_slack = np.zeros(n + 1)
        c_slack[n] = 1.0
        tiers = [c_slack, c_full]
    else:
        c_big = c_full.copy()
        c_big[n] = float(q_cost)
        tiers = [c_big]
    status, iters = ws.run(tiers, np.ones(n + 1, dtype=bool), cap)
    _raise_for(status, "warm start")
    ws.polish()

    dropped = state.dropped_rows
    if n in ws.basis:
        r = int(np.flatnonzero(ws.basis == n)[0])
        if ws.x[r] > 1e-7 * (1.0 + abs(rhs) + np.abs(state.b).max(initial=0.0)):
            raise SlackStuck(f"slack remains at {ws.x[r]:.3e} in the augmented optimum")
        structural = np.ones(n + 1, dtype=bool)
        structural[n] = False
        if ws.pivot_out(r, structural):
            ws.polish()
            ws_tmp = _Workspace(ws.A[:, :n], ws.b, ws.basis, B_inv=ws.B_inv)
            status, more = ws_tmp.run([state.c], np.ones(n, dtype=bool), max(cap - iters, 0))
            _raise_for(status, "warm start cleanup")
            iters += more
            ws = ws_tmp
        else:
            # the new row is a combination of the old ones
            ws.drop_row(r)
            dropped += 1

    ws_final = _Workspace(ws.A[:, :n], ws.b, ws.basis)
    ws_final.polish()
    return SimplexState(
        A=ws_final.A, b=ws_final.b, c=state.c, basis=ws_final.basis, x_basic=ws_final.x,
        B_inv=ws_final.B_inv, status=LPStatus.OPTIMAL, phase1_iters=0, phase2_iters=iters,
        dropped_rows=dropped,
    )


def _cold_fallback(state: SimplexState, row, rhs) -> SimplexState:
    A = np.vstack([state.A, row])
    b = np.append(state.b, rhs)
    out = solve_standard_form(state.c, A, b)
    out.dropped_rows += state.dropped_rows
    out.fallback = True
    return out
