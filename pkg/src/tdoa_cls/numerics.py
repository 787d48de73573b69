"""Small dense symmetric linear algebra for the (n+1)x(n+1) multiplier pencil.

Everything here works on matrices of size at most 4x4, so the eigensolver is a
plain cyclic Jacobi iteration over Python floats. That is both robust and, at
this size, faster than dispatching through LAPACK for every call.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EigenDecomposition",
    "SingularMatrixError",
    "AsymmetricMatrixError",
    "sym_eig",
    "solve_linear",
    "minnorm_solve",
    "min_eigenvalue",
    "is_symmetric",
]

OFFDIAG_RTOL = 1e-14
MAX_SWEEPS = 100
SYMMETRY_RTOL = 1e-12
COND_LIMIT = 1e12


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a linear solve hits a numerically singular matrix."""


class AsymmetricMatrixError(ValueError):
    pass


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix.

    Attributes
    ----------
    eigenvalues : numpy.ndarray, shape (k,)
        Ascending.
    eigenvectors : numpy.ndarray, shape (k, k)
        Orthonormal columns; column ``j`` pairs with ``eigenvalues[j]``. Each
        column has its largest-magnitude entry positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def is_symmetric(s, rtol: float = SYMMETRY_RTOL) -> bool:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        return False
    scale = np.max(np.abs(s)) if s.size else 0.0
    return bool(np.max(np.abs(s - s.T), initial=0.0) <= rtol * scale)


def _check_symmetric(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if not is_symmetric(s):
        raise AsymmetricMatrixError("matrix is not symmetric within tolerance")
    return s


def _jacobi(a: list[list[float]]) -> tuple[list[float], list[list[float]]]:
    # In-place cyclic Jacobi on a symmetric list-of-lists; returns (diag, V).
    k = len(a)
    v = [[1.0 if i == j else 0.0 for j in range(k)] for i in range(k)]
    frob = math.sqrt(sum(x * x for row in a for x in row))
    if frob == 0.0:
        return [0.0] * k, v
    target = OFFDIAG_RTOL * frob
    for _ in range(MAX_SWEEPS):
        off = math.sqrt(2.0 * sum(a[p][q] ** 2 for p in range(k) for q in range(p + 1, k)))
        if off <= target:
            break
        for p in range(k - 1):
            for q in range(p + 1, k):
                apq = a[p][q]
                if apq == 0.0:
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(1.0 + theta * theta))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                tau = s / (1.0 + c)
                a[p][p] -= t * apq
                a[q][q] += t * apq
                a[p][q] = a[q][p] = 0.0
                for r in range(k):
                    if r != p and r != q:
                        arp, arq = a[r][p], a[r][q]
                        a[r][p] = a[p][r] = arp - s * (arq + tau * arp)
                        a[r][q] = a[q][r] = arq + s * (arp - tau * arq)
                for r in range(k):
                    vrp, vrq = v[r][p], v[r][q]
                    v[r][p] = vrp - s * (vrq + tau * vrp)
                    v[r][q] = vrq + s * (vrp - tau * vrq)
    return [a[i][i] for i in range(k)], v


def sym_eig(s) -> EigenDecomposition:
    """Eigendecomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once the off-diagonal Frobenius norm drops below
    ``1e-14 * ||s||_F`` (at most 100 sweeps). Eigenvalues come back ascending;
    eigenvectors are sign-normalised so the output is deterministic.

    Raises
    ------
    AsymmetricMatrixError
        If ``s`` is not symmetric to a relative ``1e-12``.
    """
    s = _check_symmetric(s)
    k = s.shape[0]
    sym = 0.5 * (s + s.T)
    diag, v = _jacobi(sym.tolist())
    order = sorted(range(k), key=lambda i: diag[i])
    w = np.array([diag[i] for i in order])
    vecs = np.array(v)[:, order]
    for j in range(k):
        col = vecs[:, j]
        if col[np.argmax(np.abs(col))] < 0.0:
            vecs[:, j] = -col
    return EigenDecomposition(w, vecs)


def min_eigenvalue(s) -> float:
    """Smallest algebraic eigenvalue of a symmetric matrix."""
    return float(sym_eig(s).eigenvalues[0])


def solve_linear(s, rhs) -> np.ndarray:
    """Solve ``s @ y = rhs`` for a small square matrix.

    Symmetric input goes through the Jacobi eigendecomposition and the
    eigenvalue ratio serves as the condition estimate. Anything else falls back
    to LU with an SVD-based condition number.

    Raises
    ------
    SingularMatrixError
        If the condition estimate exceeds ``1e12`` (or is infinite).
    """
    s = np.asarray(s, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {s.shape}")
    if rhs.shape != (s.shape[0],):
        raise ValueError(f"rhs has shape {rhs.shape}, expected ({s.shape[0]},)")
    if is_symmetric(s):
        eig = sym_eig(s)
        mags = np.abs(eig.eigenvalues)
        lo, hi = mags.min(), mags.max()
        if lo == 0.0 or hi / lo > COND_LIMIT:
            raise SingularMatrixError(f"matrix is numerically singular (eigenvalue ratio {hi / lo if lo else np.inf:.3g})")
        v = eig.eigenvectors
        return v @ ((v.T @ rhs) / eig.eigenvalues)
    cond = np.linalg.cond(s)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMatrixError(f"matrix is numerically singular (condition {cond:.3g})")
    return np.linalg.solve(s, rhs)


def minnorm_solve(s, rhs, tol: float = 1e-9) -> np.ndarray:
    """Rank-truncated solve ``V diag(p) V^T rhs``.

    ``p_k = 1/lambda_k`` when ``|lambda_k| > tol * max|lambda|`` and ``0``
    otherwise, i.e. the minimum-norm least-squares solution restricted to the
    numerically nonsingular eigenspace.
    """
    rhs = np.asarray(rhs, dtype=float)
    eig = sym_eig(s)
    w = eig.eigenvalues
    scale = np.max(np.abs(w))
    if scale == 0.0:
        return np.zeros_like(rhs)
    keep = np.abs(w) > tol * scale
    p = np.zeros_like(w)
    p[keep] = 1.0 / w[keep]
    v = eig.eigenvectors
    return v @ (p * (v.T @ rhs))
