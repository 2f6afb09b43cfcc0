"""Weighted least squares via pivoted QR for small dense systems.

Normal equations are never formed for coefficient solves; the bread inverse
of the sandwich is obtained from the same factorization machinery. A
condition-number cutoff of 1e12 marks a system singular.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

COND_LIMIT = 1e12


class SingularSystem(Exception):
    """Internal signal: the factorized system exceeds the condition cutoff."""


def column_rank(mat: np.ndarray, cond_limit: float = COND_LIMIT) -> int:
    """Numerical rank of a matrix from its pivoted QR diagonal."""
    if mat.size == 0:
        return 0
    r = scipy.linalg.qr(mat, mode="r", pivoting=True)[0]
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        return 0
    return int(np.sum(diag > diag[0] / cond_limit))


def wls_solve(
    design: np.ndarray,
    response: np.ndarray,
    weights: np.ndarray | None = None,
    cond_limit: float = COND_LIMIT,
) -> np.ndarray:
    """Solve argmin_b || sqrt(w) (y - X b) ||_2 by pivoted QR.

    Raises SingularSystem when the weighted design's condition number
    (estimated from the pivoted R diagonal) exceeds ``cond_limit``.
    """
    x = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float)
    if weights is not None:
        root = np.sqrt(np.asarray(weights, dtype=float))
        x = x * root[:, None]
        y = y * root
    n, p = x.shape
    if n < p:
        raise SingularSystem("fewer rows than columns")
    q, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0:
        return np.zeros(0)
    if diag[0] == 0.0 or diag.min() < diag.max() / cond_limit:
        raise SingularSystem("condition number exceeds cutoff")
    z = scipy.linalg.solve_triangular(r, q.T @ y, lower=False)
    beta = np.empty(p)
    beta[piv] = z
    return beta


def inverse_via_qr(mat: np.ndarray, cond_limit: float = COND_LIMIT) -> np.ndarray:
    """Inverse of a small square matrix through pivoted QR with a cutoff."""
    m = np.asarray(mat, dtype=float)
    p = m.shape[0]
    if p == 0:
        return np.zeros((0, 0))
    q, r, piv = scipy.linalg.qr(m, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0 or diag.min() < diag.max() / cond_limit:
        raise SingularSystem("condition number exceeds cutoff")
    z = scipy.linalg.solve_triangular(r, q.T, lower=False)
    out = np.empty_like(z)
    out[piv, :] = z
    return out
