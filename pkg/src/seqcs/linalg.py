"""Dense linear algebra kernels: min-norm solves, affine distances, coherence.

Everything here works through a thin QR factorization of ``A.T``.  With
``A.T = Q R`` the row space of ``A`` is spanned by the columns of ``Q`` and
``A A.T = R.T R``, so both the min-norm solution and the distance to the
solution set reduce to a single triangular solve against ``R.T``.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from .errors import RankDeficient, ZeroColumn

RANK_RTOL = 1e-10


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[np.newaxis, :]
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return A


def as_vector(v) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("vector has non-finite entries")
    return v


def row_space_factor(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR of ``A.T`` with a relative rank check on ``diag(R)``.

    Returns ``(Q, R)`` with ``Q`` of shape (N, M) and ``R`` upper triangular
    (M, M).  Raises RankDeficient when some ``|R_ii|`` falls below
    ``1e-10 * max |R_jj|``.
    """
    A = as_matrix(A)
    M, N = A.shape
    if M > N:
        raise RankDeficient(f"{M} rows exceed {N} columns; rows cannot be independent")
    Q, R = np.linalg.qr(A.T, mode="reduced")
    if M:
        d = np.abs(np.diag(R))
        scale = d.max()
        if scale == 0.0 or d.min() < RANK_RTOL * scale:
            raise RankDeficient(
                f"row rank below {M}: min |R_ii| = {d.min():.3e}, max = {scale:.3e}"
            )
    return Q, R


def min_norm_solution(A, b) -> np.ndarray:
    """Minimum Euclidean-norm solution of the underdetermined system ``A x = b``."""
    A = as_matrix(A)
    b = as_vector(b)
    M, N = A.shape
    if b.shape[0] != M:
        raise ValueError(f"rhs has length {b.shape[0]}, expected {M}")
    if M == 0:
        return np.zeros(N)
    Q, R = row_space_factor(A)
    w = solve_triangular(R.T, b, lower=True)
    return Q @ w


def affine_distance(A, y, x_hat) -> float:
    """Euclidean distance from ``x_hat`` to the affine set ``{x : A x = y}``.

    Equals ``||A.T (A A.T)^{-1} (A x_hat - y)||``; with ``A.T = Q R`` this is
    ``||R^{-T} (A x_hat - y)||``.
    """
    A = as_matrix(A)
    y = as_vector(y)
    x_hat = as_vector(x_hat)
    M, N = A.shape
    if y.shape[0] != M or x_hat.shape[0] != N:
        raise ValueError("inconsistent dimensions")
    if M == 0:
        return 0.0
    _, R = row_space_factor(A)
    w = solve_triangular(R.T, A @ x_hat - y, lower=True)
    return float(np.linalg.norm(w))


def nullspace_basis(A) -> np.ndarray:
    """Orthonormal basis (columns) of the nullspace of a full-row-rank ``A``."""
    A = as_matrix(A)
    M, N = A.shape
    if M == 0:
        return np.eye(N)
    row_space_factor(A)
    Q, _ = np.linalg.qr(A.T, mode="complete")
    return Q[:, M:]


def mutual_coherence(A, tol: float = 1e-12) -> float:
    """Largest absolute inner product between distinct unit-normalized columns."""
    A = as_matrix(A)
    norms = np.linalg.norm(A, axis=0)
    if np.any(norms < tol):
        bad = int(np.argmax(norms < tol))
        raise ZeroColumn(f"column {bad} has norm {norms[bad]:.3e}")
    if A.shape[1] < 2:
        return 0.0
    U = A / norms
    G = np.abs(U.T @ U)
    np.fill_diagonal(G, 0.0)
    return float(min(G.max(), 1.0))
