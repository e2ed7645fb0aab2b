# -*- coding: utf-8 -*-
"""
Small Dense Matrix Kernels
Determinant, cofactor (adjugate) and PSD checks for n in {2, 3, 4},
plus the two determinant inequalities used by the verification layer
"""

import logging
from typing import Optional

import numpy as np

from config import get_config
from errors import NotPSD

logger = logging.getLogger(__name__)

SUPPORTED_DIMS = (2, 3, 4)

# Aliases used in signatures: arrays of shape (..., n, n)
SymMatrix = np.ndarray
GeneralMatrix = np.ndarray


def as_matrix(M) -> GeneralMatrix:
    """Coerce to a float array of shape (..., n, n) with n in {2, 3, 4}"""
    M = np.asarray(M, dtype=float)
    if M.ndim < 2 or M.shape[-1] != M.shape[-2]:
        raise ValueError(f"Expected square matrices, got shape {M.shape}")
    if M.shape[-1] not in SUPPORTED_DIMS:
        raise ValueError(f"Dimension n={M.shape[-1]} not supported (n must be 2, 3 or 4)")
    return M


def as_symmetric(M) -> SymMatrix:
    """Like as_matrix, but entries[i][j] must equal entries[j][i] exactly"""
    M = as_matrix(M)
    if not np.array_equal(M, np.swapaxes(M, -1, -2)):
        raise ValueError("Matrix is not exactly symmetric")
    return M


def symmetrize(M) -> SymMatrix:
    """Average with the transpose; exact symmetry by construction"""
    M = np.asarray(M, dtype=float)
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def _laplace_det(M):
    n = M.shape[-1]
    if n == 1:
        return M[..., 0, 0]
    if n == 2:
        return M[..., 0, 0] * M[..., 1, 1] - M[..., 0, 1] * M[..., 1, 0]

    # Expansion along the first row
    rest = M[..., 1:, :]
    total = np.zeros(M.shape[:-2])
    for j in range(n):
        minor = np.delete(rest, j, axis=-1)
        total = total + (-1) ** j * M[..., 0, j] * _laplace_det(minor)
    return total


def det(M):
    """
    Determinant by cofactor expansion (no pivoting).
    Works on a single matrix or a stack of shape (..., n, n).
    """
    M = as_matrix(M)
    return _laplace_det(M)


def cofactor(M) -> GeneralMatrix:
    """
    cof(M)_{ij} = (-1)^{i+j} det(M without row j and column i),
    so that M @ cof(M) = det(M) Id.
    """
    M = as_matrix(M)
    n = M.shape[-1]
    out = np.empty_like(M)
    for i in range(n):
        for j in range(n):
            minor = np.delete(np.delete(M, j, axis=-2), i, axis=-1)
            out[..., i, j] = (-1) ** (i + j) * _laplace_det(minor)
    return out


def det_lemma_residual(A, u, v) -> float:
    """
    |det(A + u v^T) - det(A) - <u v^T, cof^T(A)>| for a rank-one update.
    """
    A = as_matrix(A)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    B = np.multiply.outer(u, v)
    lhs = det(A + B)
    rhs = det(A) + np.sum(B * np.swapaxes(cofactor(A), -1, -2), axis=(-2, -1))
    return np.abs(lhs - rhs)


def eigenvalues(A):
    """Ascending eigenvalues of a symmetric matrix (or stack)"""
    return np.linalg.eigvalsh(as_matrix(A))


def min_eigenvalue(A):
    """Smallest eigenvalue of a symmetric matrix; stacks give one value per matrix"""
    return eigenvalues(A)[..., 0]


def psd_check(A, tol: Optional[float] = None):
    """True iff every eigenvalue is >= -tol. Stacks give a boolean array."""
    if tol is None:
        tol = get_config("psd_tol", 1e-10)
    if tol < 0:
        raise ValueError("tol must be >= 0")
    return min_eigenvalue(A) >= -tol


def minkowski_gap(A, B, tol: Optional[float] = None) -> float:
    """
    det(A+B)^{1/n} - det(A)^{1/n} - det(B)^{1/n} for PSD A, B.

    Raises:
        NotPSD: if either input fails psd_check at tol
    """
    A = as_symmetric(A)
    B = as_symmetric(B)
    if not np.all(psd_check(A, tol)):
        raise NotPSD("minkowski_gap: first argument is not PSD")
    if not np.all(psd_check(B, tol)):
        raise NotPSD("minkowski_gap: second argument is not PSD")

    n = A.shape[-1]
    # Round-off can push a singular PSD determinant slightly below zero
    root = lambda M: np.maximum(det(M), 0.0) ** (1.0 / n)
    return root(A + B) - root(A) - root(B)


def frobenius_norm(M):
    """Entrywise 2-norm over the last two axes"""
    return np.sqrt(np.sum(np.asarray(M, dtype=float) ** 2, axis=(-2, -1)))


def random_psd(rng: np.random.Generator, n: int, rank: Optional[int] = None, scale: float = 1.0) -> SymMatrix:
    """Gram matrix G G^T of random vectors; PSD by construction"""
    k = n if rank is None else rank
    G = rng.standard_normal((n, k)) * scale
    return symmetrize(G @ G.T)


if __name__ == "__main__":
    print("=== matkit smoke test ===")
    print(f"det(Id_3) = {det(np.eye(3))}")
    print(f"det(diag(2,3)) = {det(np.diag([2.0, 3.0]))}")
    print(f"cofactor(diag(1,2,3)) =\n{cofactor(np.diag([1.0, 2.0, 3.0]))}")
    gap = minkowski_gap(np.eye(2), np.eye(2))
    print(f"{'[OK]' if abs(gap) < 1e-12 else '[X]'} minkowski_gap(Id, Id) = {gap}")
