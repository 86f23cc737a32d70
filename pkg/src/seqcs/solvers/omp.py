"""Orthogonal matching pursuit run until the measurements are matched."""

from __future__ import annotations

import numpy as np

from ..errors import NoProgress
from ..linalg import as_matrix, as_vector


def omp(A, y, residual_tol: float = 1e-10, max_atoms: int | None = None) -> np.ndarray:
    """Greedy sparse solution of ``A x = y``.

    Each step adds the column most correlated with the residual (columns are
    compared after unit normalization) and refits all selected coefficients
    by least squares.  Stops once ``||y - A x|| <= residual_tol * (1 + ||y||)``
    or the support reaches ``max_atoms`` (default: number of rows).

    Raises
    ------
    NoProgress
        If a step fails to reduce the residual, or (without ``max_atoms``)
        the atoms run out before the target is met.  For a full-row-rank
        ``A`` either only happens through numerical breakdown.
    """
    A = as_matrix(A)
    y = as_vector(y)
    M, N = A.shape
    if y.shape[0] != M:
        raise ValueError(f"y has length {y.shape[0]}, expected {M}")
    limit = min(M, N) if max_atoms is None else min(max_atoms, M, N)
    target = residual_tol * (1.0 + np.linalg.norm(y))

    norms = np.linalg.norm(A, axis=0)
    norms[norms == 0] = np.inf
    x = np.zeros(N)
    residual = y.copy()
    res_norm = np.linalg.norm(residual)
    support: list[int] = []
    available = np.ones(N, dtype=bool)
    coef = np.zeros(0)

    while res_norm > target and len(support) < limit:
        score = np.abs(A.T @ residual) / norms
        score[~available] = -1.0
        j = int(np.argmax(score))
        support.append(j)
        available[j] = False
        coef, *_ = np.linalg.lstsq(A[:, support], y, rcond=None)
        residual = y - A[:, support] @ coef
        new_norm = np.linalg.norm(residual)
        if new_norm >= res_norm * (1.0 - 1e-12) and new_norm > target:
            raise NoProgress(f"residual stalled at {new_norm:.3e} with {len(support)} atoms")
        res_norm = new_norm

    if res_norm > target and max_atoms is None:
        raise NoProgress(f"residual {res_norm:.3e} above target after {len(support)} atoms")
    x[support] = coef
    return x


class SequentialOMP:
    """OMP decoder that re-solves from scratch on the accumulated rows."""

    def __init__(self, N: int, residual_tol: float = 1e-10):
        self.N = N
        self.residual_tol = residual_tol
        self.rows: list[np.ndarray] = []
        self.values: list[float] = []

    @property
    def M(self) -> int:
        return len(self.rows)

    def add(self, row, value: float):
        self.rows.append(np.asarray(row, dtype=float))
        self.values.append(float(value))

    def solve(self) -> np.ndarray:
        if not self.rows:
            return np.zeros(self.N)
        return omp(np.array(self.rows), np.array(self.values), self.residual_tol)
