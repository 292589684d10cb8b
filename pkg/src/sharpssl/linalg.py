"""Small dense matrix kernels: symmetric eigendecomposition, SPD solves, operator norm.

Matrices here are at most a few dozen rows in the hot path; the kernels in
:mod:`sharpssl._kernels` are plain loops (cyclic Jacobi, Cholesky) that numba
compiles.  ``solve_spd`` switches to LAPACK for large systems since the same
pivot test can be read off the LAPACK factor.
"""
from typing import NamedTuple

import numpy as np

from . import _kernels
from .errors import NotFinite, NotSymmetric, SingularWithinCovariance

SYM_TOL = 1e-9
PIVOT_REL_TOL = _kernels.PIVOT_REL_TOL
_LAPACK_MIN = 64


class SymEigen(NamedTuple):
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _as_finite(a, name="matrix"):
    a = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(a)):
        raise NotFinite(f"{name} contains NaN or Inf")
    return a


def check_symmetric(a, tol=SYM_TOL):
    a = _as_finite(a)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise NotSymmetric(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > tol * scale:
        raise NotSymmetric("matrix is not symmetric")
    return a


def sym_eigen(a):
    """Full spectral decomposition of a symmetric matrix.

    Eigenvalues are returned in descending order; each eigenvector is signed so
    that its largest-magnitude entry is positive.
    """
    a = check_symmetric(a)
    a = np.ascontiguousarray(0.5 * (a + a.T))
    w, v = _kernels.jacobi_eigh(a)
    return SymEigen(w, v)


def cholesky(a, rel_tol=PIVOT_REL_TOL):
    """Lower Cholesky factor; raises if a pivot is at or below rel_tol * trace/rows."""
    a = check_symmetric(a)
    n = a.shape[0]
    if n >= _LAPACK_MIN:
        tr = float(np.trace(a))
        try:
            L = np.linalg.cholesky(a)
        except np.linalg.LinAlgError:
            raise SingularWithinCovariance("Cholesky factorisation failed") from None
        pivots = np.diag(L) ** 2
        if not (tr > 0 and np.all(pivots > rel_tol * tr / n)):
            raise SingularWithinCovariance("within-class covariance is numerically singular")
        return L
    L, ok = _kernels.cholesky(np.ascontiguousarray(a), rel_tol)
    if not ok:
        raise SingularWithinCovariance(
            f"within-class covariance is numerically singular (d={n}); "
            "is d larger than the effective sample rank?"
        )
    return L


def cho_solve(L, b):
    b = np.asarray(b, dtype=float)
    vec = b.ndim == 1
    B = b.reshape(-1, 1) if vec else b
    if L.shape[0] >= _LAPACK_MIN:
        from scipy.linalg import solve_triangular

        x = solve_triangular(L, B, lower=True)
        x = solve_triangular(L.T, x, lower=False)
    else:
        x = _kernels.chol_solve(L, np.ascontiguousarray(B))
    return x.ravel() if vec else x


def solve_spd(a, b):
    """Solve ``a @ x = b`` for symmetric positive-definite ``a``."""
    b = _as_finite(b, "right-hand side")
    L = cholesky(a)
    if b.shape[0] != L.shape[0]:
        raise ValueError(f"shape mismatch: {L.shape} vs {b.shape}")
    return cho_solve(L, b)


def op_norm(a):
    """Largest singular value, via the top eigenvalue of a^T a."""
    a = _as_finite(a)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    return float(_kernels.op_norm(np.ascontiguousarray(a)))
