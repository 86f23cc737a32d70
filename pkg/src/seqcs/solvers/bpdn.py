"""Basis pursuit denoising ``min 0.5 ||y - A x||^2 + lam ||x||_1``.

Accelerated proximal gradient (FISTA) with backtracking on the step size and
function-value restarts.  Every ``polish_every`` iterations a short active-set
refinement starts from the current iterate; its result is accepted only if
it satisfies the full optimality conditions.
Termination is certified by :func:`optimality_residual`.
"""

from __future__ import annotations

import math

import numpy as np

from scipy.linalg import solve_triangular

from ..errors import IterationLimit
from ..linalg import as_matrix, as_vector


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def lambda_schedule(M: int, N: int, c: float) -> float:
    """Regularization weight ``c * sqrt(M log N)`` for the M-th noisy problem."""
    if M < 1 or N < 2 or c <= 0:
        raise ValueError(f"need M >= 1, N >= 2, c > 0 (got M={M}, N={N}, c={c})")
    return c * math.sqrt(M * math.log(N))


def objective(A, y, x, lam) -> float:
    r = y - A @ x
    return 0.5 * float(r @ r) + lam * float(np.abs(x).sum())


def optimality_residual(A, y, x, lam) -> float:
    """Largest violation of the subgradient conditions, in units of ``lam``.

    With ``g = A'(A x - y)``: nonzero coordinates need ``g_i = -lam sign(x_i)``
    and zero coordinates need ``|g_i| <= lam``.
    """
    g = A.T @ (A @ x - y)
    nz = x != 0
    res = np.maximum(np.abs(g) - lam, 0.0)
    res[nz] = np.abs(g[nz] + lam * np.sign(x[nz]))
    return float(res.max(initial=0.0)) / lam


def _stationary_point(As, y, shift):
    """Minimizer of ``0.5 ||As v - y||^2 + shift'v``, or None if ``As`` lacks full column rank."""
    m, k = As.shape
    if k > m:
        return None
    Q, R = np.linalg.qr(As)
    d = np.abs(np.diag(R))
    if d.min(initial=np.inf) <= 1e-12 * d.max(initial=0.0):
        return None
    w = solve_triangular(R, shift, trans="T")
    return solve_triangular(R, Q.T @ y - w)


def _null_step(As, start, signs):
    """Move along a null direction of ``As`` (fit unchanged, l1 term linear
    and non-increasing) until the first coordinate reaches zero."""
    v = np.linalg.svd(As)[2][-1]
    if signs @ v > 0:
        v = -v
    # coordinates already at zero only move in the direction of their sign
    hits = (start * v < 0)
    if not hits.any():
        return None
    ratios = -start[hits] / v[hits]
    j = np.flatnonzero(hits)[np.argmin(ratios)]
    out = start + ratios.min() * v
    out[j] = 0.0
    return out


def _purify(A, x):
    """Shrink the support to independent columns without raising the objective."""
    x = x.copy()
    while np.count_nonzero(x):
        support = np.flatnonzero(x)
        As = A[:, support]
        if support.size <= A.shape[0]:
            d = np.abs(np.diag(np.linalg.qr(As, mode="r")))
            if d.min() > 1e-12 * d.max():
                break
        step = _null_step(As, x[support], np.sign(x[support]))
        if step is None:
            break
        x[support] = step
    return x


def _polish(A, y, x, lam, tol, max_steps: int = 60):
    """Active-set refinement from ``x``; returns an optimal point or None.

    With independent support columns, each step solves the stationarity
    system for the current signs and moves towards that solution, stopping
    at the first sign change (convexity makes this a descent step).  Once
    the support is stationary the zero coordinate with the largest violation
    ``|g_i| > lam`` joins it; if the enlarged support is dependent the step
    runs along its null direction instead, which keeps the fit and lowers
    the l1 term, much like a simplex pivot.
    """
    if np.count_nonzero(x) > 1.1 * A.shape[0] + 10:
        return None
    x = _purify(A, x)
    for _ in range(max_steps):
        if optimality_residual(A, y, x, lam) <= tol:
            return x
        support = np.flatnonzero(x)
        g = A.T @ (A @ x - y)
        signs = np.sign(x[support])
        stationary = support.size == 0 or np.abs(g[support] + lam * signs).max() <= tol * lam
        if stationary:
            viol = np.abs(g)
            viol[support] = 0.0
            i = int(np.argmax(viol))
            if viol[i] <= lam:
                return None
            support = np.append(support, i)
            signs = np.append(signs, -np.sign(g[i]))
        As = A[:, support]
        start = x[support]
        target = _stationary_point(As, y, lam * signs)
        if target is None:
            step = _null_step(As, start, signs)
            if step is None:
                return None
        else:
            diff = target - start
            crossing = (start != 0) & (start * target < 0)
            if crossing.any():
                ts = -start[crossing] / diff[crossing]
                j = np.flatnonzero(crossing)[np.argmin(ts)]
                step = start + ts.min() * diff
                step[j] = 0.0
            else:
                step = target
        x = x.copy()
        x[support] = step
    return x if optimality_residual(A, y, x, lam) <= tol else None


def bpdn(A, y, lam: float, tol: float = 1e-9, max_iter: int = 50_000, x0=None,
         polish_every: int = 50) -> np.ndarray:
    """Solve the l1-penalized least-squares problem.

    Parameters
    ----------
    A, y : array_like
        Measurement matrix (M, N) and observations (M,).
    lam : float
        Penalty weight, must be positive.
    tol : float
        Target for :func:`optimality_residual` (relative to ``lam``).
    x0 : array_like, optional
        Starting point, e.g. the previous solution in a sequential run.

    Raises
    ------
    IterationLimit
        If the optimality residual is still above ``tol`` after ``max_iter``
        iterations, or the iteration stalls at the rounding floor first.
    """
    A = as_matrix(A)
    y = as_vector(y)
    if lam <= 0:
        raise ValueError("lam must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    M, N = A.shape
    Aty = A.T @ y
    if np.abs(Aty).max(initial=0.0) <= lam:
        return np.zeros(N)

    x = np.zeros(N) if x0 is None else as_vector(x0).copy()
    # start from a cheap lower estimate of ||A||^2 and let backtracking raise it
    L = max(np.linalg.norm(A, "fro") ** 2 / max(min(M, N), 1), 1e-12)
    v = x.copy()
    t = 1.0
    f_prev = objective(A, y, x, lam)
    restarted = False

    for it in range(1, max_iter + 1):
        r_v = A @ v - y
        grad = A.T @ r_v
        f_v = 0.5 * float(r_v @ r_v)
        while True:
            x_new = soft_threshold(v - grad / L, lam / L)
            d = x_new - v
            r_new = A @ x_new - y
            if 0.5 * float(r_new @ r_new) <= f_v + float(grad @ d) + 0.5 * L * float(d @ d) + 1e-12 * abs(f_v):
                break
            L *= 2.0
        f_new = 0.5 * float(r_new @ r_new) + lam * float(np.abs(x_new).sum())
        if f_new > f_prev:
            if restarted:
                # even a plain proximal step from x fails to descend: rounding floor
                break
            t = 1.0
            v = x.copy()
            restarted = True
        else:
            restarted = False
            t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
            v = x_new + ((t - 1.0) / t_new) * (x_new - x)
            x, t, f_prev = x_new, t_new, f_new
            if optimality_residual(A, y, x, lam) <= tol:
                return x
        if it % polish_every == 0:
            cand = _polish(A, y, x, lam, tol)
            if cand is not None:
                return cand

    cand = _polish(A, y, x, lam, tol)
    if cand is not None:
        return cand
    raise IterationLimit(f"bpdn stopped at residual {optimality_residual(A, y, x, lam):.3e} "
                         f"(target {tol:g}) after {it} iterations")


class SequentialBPDN:
    """Noisy decoder: re-solves with ``lam = lambda_schedule(M, N, c)``, warm from the last solution."""

    def __init__(self, N: int, c: float, tol: float = 1e-9):
        self.N = N
        self.c = c
        self.tol = tol
        self.rows: list[np.ndarray] = []
        self.values: list[float] = []
        self._x = np.zeros(N)

    @property
    def M(self) -> int:
        return len(self.rows)

    def add(self, row, value: float):
        self.rows.append(np.asarray(row, dtype=float))
        self.values.append(float(value))

    def solve(self) -> np.ndarray:
        if not self.rows:
            return np.zeros(self.N)
        lam = lambda_schedule(self.M, self.N, self.c)
        self._x = bpdn(np.array(self.rows), np.array(self.values), lam, tol=self.tol, x0=self._x)
        return self._x
