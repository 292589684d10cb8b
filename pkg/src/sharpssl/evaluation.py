"""Clustering metrics, mean-estimation losses and population signal diagnostics."""
import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, LabelOutOfRange, LengthMismatch
from .linalg import cholesky, cho_solve, sym_eigen

BRUTE_FORCE_MAX_K = 8
SUPPORT_TOL = 1e-12


def _confusion(truth, pred, K):
    truth = np.asarray(truth, dtype=np.int64)
    pred = np.asarray(pred, dtype=np.int64)
    if truth.shape != pred.shape:
        raise LengthMismatch(f"{truth.size} true labels vs {pred.size} predictions")
    if K is None:
        K = int(max(truth.max(initial=1), pred.max(initial=1)))
    for lab in (truth, pred):
        if lab.size and (lab.min() < 1 or lab.max() > K):
            raise LabelOutOfRange(f"labels must lie in 1..{K}")
    C = np.zeros((K, K), dtype=np.int64)
    np.add.at(C, (pred - 1, truth - 1), 1)
    return C


def misclustering_rate(truth, pred, K=None, method="auto"):
    """Smallest mismatch fraction over relabelings of ``pred``.

    ``method`` is "brute" (enumerate permutations), "hungarian" (assignment
    solver) or "auto" (brute force for K <= 8).
    """
    C = _confusion(truth, pred, K)
    n = int(C.sum())
    if n == 0:
        return 0.0
    K = C.shape[0]
    if method == "auto":
        method = "brute" if K <= BRUTE_FORCE_MAX_K else "hungarian"
    if method == "brute":
        agree = max(int(C[np.arange(K), perm].sum()) for perm in itertools.permutations(range(K)))
    elif method == "hungarian":
        rows, cols = linear_sum_assignment(C, maximize=True)
        agree = int(C[rows, cols].sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    return (n - agree) / n


def sign_loss(mu, mu_star):
    """min(||mu - mu*||, ||mu + mu*||)."""
    mu = np.asarray(mu, dtype=float)
    mu_star = np.asarray(mu_star, dtype=float)
    if mu.shape != mu_star.shape:
        raise DimensionMismatch(f"{mu.shape} vs {mu_star.shape}")
    return float(min(np.linalg.norm(mu - mu_star), np.linalg.norm(mu + mu_star)))


def pair_frobenius_loss(est, truth):
    """Frobenius distance between two mean pairs, minimised over swapping the estimate."""
    e1, e2 = (np.asarray(v, dtype=float) for v in est)
    t1, t2 = (np.asarray(v, dtype=float) for v in truth)
    if not (e1.shape == e2.shape == t1.shape == t2.shape):
        raise DimensionMismatch("all four mean vectors must have the same shape")
    T = np.column_stack([t1, t2])
    return float(min(np.linalg.norm(np.column_stack([e1, e2]) - T),
                     np.linalg.norm(np.column_stack([e2, e1]) - T)))


@dataclass(frozen=True)
class Recovery:
    contains: bool
    hits: int
    precision: float
    recall: float


def recovery(selected, truth):
    sel = set(int(j) for j in selected)
    tru = set(int(j) for j in truth)
    hits = len(sel & tru)
    return Recovery(
        contains=tru <= sel,
        hits=hits,
        precision=hits / len(sel) if sel else 0.0,
        recall=hits / len(tru) if tru else 1.0,
    )


@dataclass(frozen=True)
class SignalDiagnostics:
    diag: np.ndarray
    support: np.ndarray
    s0: int
    gamma_min: float
    gamma_max: float


def between_covariance(spec):
    nu = spec.priors @ spec.means
    dev = spec.means - nu
    return (dev * spec.priors[:, None]).T @ dev


def population_diagnostics(spec):
    """Diagonal of Sw^-1 Sb, its support and extreme values on the support."""
    sb = between_covariance(spec)
    L = cholesky(spec.sigma_w)
    Q = cho_solve(L, sb)
    diag = np.diag(Q).copy()
    support = np.flatnonzero(np.abs(diag) > SUPPORT_TOL)
    if support.size:
        gmin, gmax = float(diag[support].min()), float(diag[support].max())
    else:
        gmin = gmax = 0.0
    return SignalDiagnostics(diag, support, int(support.size), gmin, gmax)


def discriminant_eigenspace(spec, r=None):
    """Orthonormal basis for the top-r eigenspace of Sw^-1 Sb (r defaults to K - 1).

    Uses the symmetric form L^-1 Sb L^-T with Sw = L L^T: if u is one of its
    eigenvectors then L^-T u is an eigenvector of Sw^-1 Sb.
    """
    from scipy.linalg import solve_triangular

    r = spec.K - 1 if r is None else r
    L = cholesky(spec.sigma_w)
    sb = between_covariance(spec)
    S = solve_triangular(L, solve_triangular(L, sb, lower=True).T, lower=True)
    S = 0.5 * (S + S.T)
    eig = sym_eigen(S)
    vecs = solve_triangular(L.T, eig.eigenvectors[:, :r], lower=False)
    q, _ = np.linalg.qr(vecs)
    return q, eig.eigenvalues


def principal_angles(U, V):
    """Principal angles (radians, descending) between two column spaces."""
    from scipy.linalg import subspace_angles

    return subspace_angles(np.asarray(U, dtype=float), np.asarray(V, dtype=float))


def mean_direction_span(spec):
    """Orthonormal basis of span{Sw^-1 (nu_k - nu)}."""
    nu = spec.priors @ spec.means
    L = cholesky(spec.sigma_w)
    dirs = cho_solve(L, (spec.means - nu).T)
    u, s, _ = np.linalg.svd(dirs, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0
    return u[:, :rank]
