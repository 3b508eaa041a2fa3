"""
Cyclic Jacobi eigen-solver for stacks of small symmetric matrices.

Every rotation is applied to the whole stack at once, so the cost of a
certificate is a few dozen numpy operations on (N, 4, 4) arrays rather than
N separate decompositions. Matrices drop out of the stack once they have
converged.
"""
import logging
from typing import Tuple

import numpy as np

from config import settings
from src.core.dynamics import SymMat4

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_TINY = 1e-300


def _off_diagonal_norm(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    mask = ~np.eye(n, dtype=bool)
    return np.sqrt(np.sum(np.where(mask, a, 0.0) ** 2, axis=(-2, -1)))


def _sweep(a: np.ndarray, vectors: np.ndarray):
    """One cyclic sweep of rotations over all (p, q) pairs, in place."""
    n = a.shape[-1]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[:, p, q]
            # rotations below roundoff of the diagonal change nothing
            floor = np.maximum(_EPS * (np.abs(a[:, p, p]) + np.abs(a[:, q, q])), _TINY)
            active = np.abs(apq) > floor
            safe_apq = np.where(active, apq, 1.0)
            theta = (a[:, q, q] - a[:, p, p]) / (2.0 * safe_apq)
            sign = np.where(theta >= 0.0, 1.0, -1.0)
            t = sign / (np.abs(theta) + np.sqrt(theta * theta + 1.0))
            t = np.where(active, t, 0.0)
            cos = 1.0 / np.sqrt(t * t + 1.0)
            sin = t * cos

            col_p = a[:, :, p].copy()
            col_q = a[:, :, q]
            a[:, :, p] = cos[:, None] * col_p - sin[:, None] * col_q
            a[:, :, q] = sin[:, None] * col_p + cos[:, None] * col_q
            row_p = a[:, p, :].copy()
            row_q = a[:, q, :]
            a[:, p, :] = cos[:, None] * row_p - sin[:, None] * row_q
            a[:, q, :] = sin[:, None] * row_p + cos[:, None] * row_q

            vec_p = vectors[:, :, p].copy()
            vec_q = vectors[:, :, q]
            vectors[:, :, p] = cos[:, None] * vec_p - sin[:, None] * vec_q
            vectors[:, :, q] = sin[:, None] * vec_p + cos[:, None] * vec_q


def jacobi_eigh(matrices, tol: float = settings.JACOBI_OFFDIAG_TOL,
                max_sweeps: int = settings.JACOBI_MAX_SWEEPS) -> Tuple[np.ndarray, np.ndarray]:
    """
    Diagonalize symmetric matrices by cyclic Jacobi rotations.

    Sweeps over all (p, q) pairs until the off-diagonal Frobenius norm of
    every matrix is below tol * max(1, |A|_F). Each sweep only touches the
    matrices that have not converged yet.

    Args:
        matrices: Array of shape (..., n, n), symmetric
        tol: Relative off-diagonal tolerance
        max_sweeps: Upper bound on full sweeps

    Returns:
        Tuple[np.ndarray, np.ndarray]: eigenvalues (..., n) in ascending order
        and eigenvectors (..., n, n) with eigenvector k in column k
    """
    a = np.array(matrices, dtype=float)
    n = a.shape[-1]
    batch_shape = a.shape[:-2]
    a = a.reshape((-1, n, n))
    vectors = np.broadcast_to(np.eye(n), a.shape).copy()
    scale = np.maximum(1.0, np.sqrt(np.sum(a ** 2, axis=(-2, -1))))

    for sweep in range(max_sweeps):
        pending = np.nonzero(_off_diagonal_norm(a) > tol * scale)[0]
        if len(pending) == 0:
            break
        if len(pending) == len(a):
            _sweep(a, vectors)
        else:
            sub_a, sub_vectors = a[pending], vectors[pending]
            _sweep(sub_a, sub_vectors)
            a[pending], vectors[pending] = sub_a, sub_vectors
    else:
        logger.warning("Jacobi iteration stopped after %d sweeps without reaching tol=%g",
                       max_sweeps, tol)

    values = np.diagonal(a, axis1=-2, axis2=-1).copy()
    order = np.argsort(values, axis=-1, kind='stable')
    values = np.take_along_axis(values, order, axis=-1)
    vectors = np.take_along_axis(vectors, order[:, None, :], axis=-1)
    return values.reshape(batch_shape + (n,)), vectors.reshape(batch_shape + (n, n))


def min_eigenvalue_batch(matrices) -> np.ndarray:
    values, _ = jacobi_eigh(matrices)
    return values[..., 0]


def min_eigenvalue(m: SymMat4) -> float:
    """
    Smallest eigenvalue of a symmetric 4x4 matrix.

    Args:
        m: The matrix

    Returns:
        float: its smallest eigenvalue
    """
    return float(min_eigenvalue_batch(m.to_array()))


def min_eigenpair(m: SymMat4) -> Tuple[float, np.ndarray]:
    values, vectors = jacobi_eigh(m.to_array())
    return float(values[0]), vectors[:, 0]
