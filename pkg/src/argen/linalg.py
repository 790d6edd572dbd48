"""Dense symmetric eigensolver based on the cyclic Jacobi rotation scheme.

The solvers only ever need the smallest eigenvalue and one associated
unit eigenvector of a small dense Hessian; the full spectrum falls out
of the Jacobi sweeps as a by-product and is reused for spectral norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DENSE_LIMIT_DEFAULT = 1000

# Off-diagonal Frobenius tolerance, relative to ||H||_F.
_JACOBI_TOL = 1e-13
_JACOBI_MAX_SWEEPS = 50


@dataclass(frozen=True)
class EigenPair:
    """Smallest eigenvalue of a symmetric matrix and a unit (l2) eigenvector."""

    lambda_min: float
    u: np.ndarray


def check_symmetric(H, what: str = "matrix") -> np.ndarray:
    """Validate a dense symmetric matrix and return a symmetrized float copy."""
    H = np.asarray(H, dtype=float)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"{what} must be a square 2-D array, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{what} contains non-finite entries")
    scale = 1.0 + float(np.max(np.abs(H))) if H.size else 1.0
    if float(np.max(np.abs(H - H.T), initial=0.0)) > 1e-12 * scale:
        raise ValueError(f"{what} is not symmetric")
    return 0.5 * (H + H.T)


def _off_diag_norm(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off))


def eigh_jacobi(H, max_sweeps: int = _JACOBI_MAX_SWEEPS):
    """Full eigendecomposition of a symmetric matrix via cyclic Jacobi sweeps.

    Returns (w, V) with eigenvalues ``w`` sorted ascending and matching
    orthonormal eigenvector columns in ``V``.  Deterministic for a fixed
    input: sweep order is row-cyclic and ties in the final sort are stable.
    """
    A = check_symmetric(H)
    n = A.shape[0]
    V = np.eye(n)
    if n == 1:
        return np.array([A[0, 0]]), V
    norm_f = float(np.linalg.norm(A))
    if norm_f == 0.0:
        return np.zeros(n), V
    threshold = _JACOBI_TOL * norm_f
    for _ in range(max_sweeps):
        if _off_diag_norm(A) <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    A[p, q] = A[q, p] = 0.0
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.hypot(1.0, tau))
                else:
                    t = -1.0 / (-tau + math.hypot(1.0, tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                # Two-sided rotation on rows/columns p and q.
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = ap * c - aq * s
                A[:, q] = aq * c + ap * s
                ap = A[p, :].copy()
                aq = A[q, :].copy()
                A[p, :] = ap * c - aq * s
                A[q, :] = aq * c + ap * s
                A[p, q] = A[q, p] = 0.0
                vp = V[:, p].copy()
                vq = V[:, q].copy()
                V[:, p] = vp * c - vq * s
                V[:, q] = vq * c + vp * s
    w = np.diag(A).copy()
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def _canonical_sign(u: np.ndarray) -> np.ndarray:
    for x in u:
        if x != 0.0:
            return -u if x < 0.0 else u
    return u


def smallest_eigenpair(H, dense_limit: int = DENSE_LIMIT_DEFAULT) -> EigenPair:
    """Smallest eigenvalue and a unit eigenvector of a dense symmetric matrix.

    The eigenvector sign is canonicalized so its first nonzero component is
    positive; callers needing a specific inner-product sign flip it themselves.
    """
    H = check_symmetric(H)
    if H.shape[0] > dense_limit:
        raise ValueError(
            f"matrix of size {H.shape[0]} exceeds the dense limit {dense_limit}"
        )
    w, V = eigh_jacobi(H)
    u = _canonical_sign(np.ascontiguousarray(V[:, 0]))
    return EigenPair(float(w[0]), u)


def spectral_norm(H) -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    w, _ = eigh_jacobi(H)
    return max(abs(float(w[0])), abs(float(w[-1])))
