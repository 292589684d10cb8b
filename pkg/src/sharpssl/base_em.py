"""Semi-supervised Gaussian EM base learner.

Two constraint sets are supported: ``general`` (free means, shared SPD
covariance) and ``symmetric`` (two classes with means -mu and +mu and identity
covariance), the latter having a closed-form tanh iteration.  Several chains
can be run from random starts; the reported estimate is the chain whose Q has
the smallest median operator-norm distance to the others.
"""
import itertools
import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from ._accel import use_numba
from .base_lda import WhitenedBetween
from .errors import AllRunsFailed, ConfigError, DataError, SingularWithinCovariance
from .linalg import cho_solve, cholesky, op_norm, solve_spd
from .projections import EM_INIT_STREAM, SeededRng

log = logging.getLogger(__name__)

VARIANTS = ("general", "symmetric")
INITS = ("hierarchical", "sphere", "user")


@dataclass(frozen=True)
class EmParams:
    means: np.ndarray   # K x d
    sigma: np.ndarray   # d x d

    @property
    def K(self):
        return self.means.shape[0]

    @property
    def d(self):
        return self.means.shape[1]

    @classmethod
    def symmetric(cls, mu):
        mu = np.asarray(mu, dtype=float)
        return cls(np.vstack([-mu, mu]), np.eye(mu.size))

    def permuted(self, perm):
        """Parameters for data whose coordinates were reordered by ``perm``."""
        perm = np.asarray(perm)
        return EmParams(self.means[:, perm], self.sigma[np.ix_(perm, perm)])


@dataclass(frozen=True)
class SoftLabels:
    L: np.ndarray   # n x K responsibilities

    def hard(self):
        """1-based labels; ties resolve to the smallest class index."""
        return np.argmax(self.L, axis=1).astype(np.int64) + 1


@dataclass(frozen=True)
class EmConfig:
    M: int = 1
    T: int = 100
    variant: str = "general"
    init: str = "hierarchical"
    radius: Optional[float] = None
    early_stop_tol: Optional[float] = None

    def __post_init__(self):
        if self.M < 1 or self.T < 1:
            raise ConfigError(f"EM needs M >= 1 and T >= 1 (got M={self.M}, T={self.T})")
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown EM variant {self.variant!r}")
        if self.init not in INITS:
            raise ConfigError(f"unknown EM initialisation {self.init!r}")
        if self.radius is not None and not self.radius > 0:
            raise ConfigError("sphere radius must be positive")
        if self.early_stop_tol is not None and not self.early_stop_tol > 0:
            raise ConfigError("early_stop_tol must be positive when set")

    @property
    def chains(self):
        # hierarchical starts are deterministic, so extra chains add nothing
        return 1 if self.init == "hierarchical" else self.M


@dataclass(frozen=True)
class EmFit:
    params: EmParams
    labels: SoftLabels
    whitened: WhitenedBetween
    chain: int = 0
    history: list = field(default_factory=list, compare=False, repr=False)


# ---------------------------------------------------------------------------
# E and M steps
# ---------------------------------------------------------------------------

def _check_labels(ds, K):
    if ds.y.size and ds.y.max() > K:
        raise DataError(f"label {ds.y.max()} exceeds the number of mixture components {K}")


def e_step(ds, params):
    """Responsibilities: Gaussian posteriors (equal weights) for unlabeled rows,
    exact indicators for labeled rows."""
    K = params.K
    _check_labels(ds, K)
    L = cholesky(params.sigma)
    z = ds.x
    logits = np.empty((ds.n, K))
    for k in range(K):
        u = cho_solve(L, (z - params.means[k]).T)          # sigma^-1 (z - mu_k)
        logits[:, k] = -0.5 * np.einsum("ij,ji->i", z - params.means[k], u)
    resp = np.exp(logits - logits.max(axis=1, keepdims=True))
    resp /= resp.sum(axis=1, keepdims=True)
    lab = ds.y > 0
    resp[lab] = 0.0
    resp[lab, ds.y[lab] - 1] = 1.0
    return SoftLabels(resp)


def m_step(ds, labels, variant="general", previous=None):
    """Maximise the expected complete-data objective over the constraint set."""
    L = labels.L
    z = ds.x
    n = ds.n
    if variant == "symmetric":
        if L.shape[1] != 2:
            raise ConfigError("the symmetric variant needs K = 2")
        mu = (L[:, 1] - L[:, 0]) @ z / n
        return EmParams.symmetric(mu)
    if variant != "general":
        raise ConfigError(f"unknown EM variant {variant!r}")
    Nk = L.sum(axis=0)
    means = np.empty((L.shape[1], ds.p))
    for k in range(L.shape[1]):
        if Nk[k] > 0:
            means[k] = L[:, k] @ z / Nk[k]
        elif previous is not None:
            means[k] = previous.means[k]
        else:
            means[k] = 0.0
    sigma = np.zeros((ds.p, ds.p))
    for k in range(L.shape[1]):
        r = z - means[k]
        sigma += (r * L[:, k:k + 1]).T @ r
    sigma = sigma / n
    sigma = 0.5 * (sigma + sigma.T)
    cholesky(sigma)  # raises SingularWithinCovariance
    return EmParams(means, sigma)


def between_from_labels(params, labels):
    """Soft between-class covariance and the responsibility-weighted overall mean."""
    L = labels.L
    n = L.shape[0]
    Nk = L.sum(axis=0)
    tot = Nk @ params.means / n
    dev = params.means - tot
    sb = (dev * (Nk / n)[:, None]).T @ dev
    return 0.5 * (sb + sb.T), tot


def observed_loglik(ds, params):
    """Log-likelihood with exact labels on labeled rows and an equal-weight
    mixture on unlabeled rows (additive constants dropped)."""
    L = cholesky(params.sigma)
    logdet = 2.0 * np.sum(np.log(np.diag(L)))
    K = params.K
    logits = np.empty((ds.n, K))
    for k in range(K):
        r = ds.x - params.means[k]
        u = cho_solve(L, r.T)
        logits[:, k] = -0.5 * np.einsum("ij,ji->i", r, u) - 0.5 * logdet
    lab = ds.y > 0
    total = logits[lab, ds.y[lab] - 1].sum()
    total += logsumexp(logits[~lab], axis=1).sum()
    return float(total)


def em_update_tanh(ds, mu):
    """One step of the closed-form symmetric two-component iteration."""
    z, y = ds.x, ds.y
    s = np.where(y == 2, 1.0, np.where(y == 1, -1.0, np.tanh(z @ mu)))
    return s @ z / ds.n


# ---------------------------------------------------------------------------
# initialisation
# ---------------------------------------------------------------------------

def init_hierarchical(ds, K=None):
    """Ward clustering cut at K groups; cluster ids matched to observed labels.

    Means are the cluster means, the covariance is the pooled within-cluster
    covariance with eigenvalues floored at 1e-8 * trace / d.
    """
    K = ds.K if K is None else K
    if ds.n < K:
        raise DataError(f"hierarchical initialisation needs n >= K ({ds.n} < {K})")
    if use_numba():
        means, sigma, clipped = _kernels.hierarchical_init(ds.x, ds.y, K)
    else:
        means, sigma, clipped = _hierarchical_init_numpy(ds.x, ds.y, K)
    if clipped:
        log.warning("pooled covariance from hierarchical init was near-singular; eigenvalues floored")
    return EmParams(means, sigma)


def _align(clusters, y, K):
    perm = np.arange(K)
    lab = y > 0
    if not lab.any() or K > 8:
        return perm
    counts = np.zeros((K, K))
    np.add.at(counts, (clusters[lab], y[lab] - 1), 1.0)
    best, best_score = perm, -1.0
    for cand in itertools.permutations(range(K)):
        score = counts[np.arange(K), cand].sum()
        if score > best_score:
            best, best_score = np.array(cand), score
    return best


def _hierarchical_init_numpy(z, y, K):
    from scipy.cluster.hierarchy import fcluster, ward

    n, d = z.shape
    if K >= n:
        clusters = np.arange(n)
    else:
        raw = fcluster(ward(z), K, criterion="maxclust")
        _, first = np.unique(raw, return_index=True)
        order = np.argsort(first)
        remap = np.empty(raw.max() + 1, dtype=np.int64)
        remap[np.unique(raw)[order]] = np.arange(order.size)
        clusters = remap[raw]
    cls = _align(clusters, y, K)[clusters]
    counts = np.bincount(cls, minlength=K).astype(float)
    sums = np.zeros((K, d))
    np.add.at(sums, cls, z)
    means = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    r = z - means[cls]
    S = r.T @ r / n
    S = 0.5 * (S + S.T)
    total_tr = float(np.sum((z - z.mean(axis=0)) ** 2) / n)
    scale = np.trace(S) / d
    if not scale > 0:
        scale = total_tr / d
    if not scale > 0:
        scale = 1.0
    floor = _kernels.FLOOR_REL * scale
    w, V = np.linalg.eigh(S)
    if w[0] >= floor:
        return means, S, False
    S = (V * np.maximum(w, floor)) @ V.T
    return means, 0.5 * (S + S.T), True


def default_radius(ds):
    """Sphere radius max(zeta0, omega0) with delta = 1, r = 1."""
    n, nu = ds.n, ds.n_unlabeled
    if nu == 0:
        return 1.0
    omega = np.sqrt(ds.p * np.log(max(n, 2)) / nu)
    zeta = np.sqrt(omega) if ds.n_labeled == 0 else min(omega / np.sqrt(ds.gamma), np.sqrt(omega))
    return float(max(zeta, omega))


def init_uniform_sphere(rng, d, radius, K=2, center=None):
    """Start at (-mu, mu, I) with mu uniform on the radius sphere.

    For K > 2 every mean gets its own independent sphere draw around ``center``.
    """
    if not radius > 0:
        raise ConfigError("radius must be positive")
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    center = np.zeros(d) if center is None else np.asarray(center, dtype=float)
    if K == 2:
        g = gen.standard_normal(d)
        mu = radius * g / np.linalg.norm(g)
        return EmParams(np.vstack([center - mu, center + mu]), np.eye(d))
    g = gen.standard_normal((K, d))
    g *= radius / np.linalg.norm(g, axis=1, keepdims=True)
    return EmParams(center + g, np.eye(d))


def chain_inits(ds, config, rng, K=None):
    """Initial parameters for each chain; chain m draws from ``rng.child(m)``."""
    K = ds.K if K is None else K
    if config.init == "hierarchical":
        return [init_hierarchical(ds, K)]
    if config.init == "user":
        raise ConfigError("init='user' requires explicit initial parameters")
    radius = config.radius if config.radius is not None else default_radius(ds)
    center = None if config.variant == "symmetric" else ds.x.mean(axis=0)
    return [init_uniform_sphere(rng.child(m), ds.p, radius, K, center) for m in range(config.M)]


# ---------------------------------------------------------------------------
# drivers
# ---------------------------------------------------------------------------

def run_em_single(ds, init, config, record=False):
    """T EM iterations from ``init`` followed by the Q = Sw^-1 Sb summary."""
    _check_labels(ds, init.K)
    if config.variant == "symmetric":
        if init.K != 2:
            raise ConfigError("the symmetric variant needs K = 2")
        params = EmParams.symmetric(0.5 * (init.means[1] - init.means[0]))
    else:
        params = init
    history = [params] if record else []
    for _ in range(config.T):
        labels = e_step(ds, params)
        new = m_step(ds, labels, config.variant, previous=params)
        change = np.sqrt(np.max(np.sum((new.means - params.means) ** 2, axis=1)))
        params = new
        if record:
            history.append(params)
        if config.early_stop_tol is not None and change < config.early_stop_tol:
            break
    labels = e_step(ds, params)
    sb, _ = between_from_labels(params, labels)
    if config.variant == "symmetric":
        q = sb
    else:
        q = solve_spd(params.sigma, sb)
    return EmFit(params, labels, WhitenedBetween.from_matrix(q), history=history)


def median_select(qs: Sequence[np.ndarray]):
    """Index minimising the median op-norm distance to the other estimates.

    Even counts use the mean of the two central values; ties go to the
    smallest index.
    """
    M = len(qs)
    if M == 1:
        return 0
    best, best_val = 0, np.inf
    for m in range(M):
        dist = [op_norm(qs[m] - qs[j]) for j in range(M) if j != m]
        med = float(np.median(dist))
        if med < best_val:
            best, best_val = m, med
    return best


def run_em_multistart(ds, config, rng=None, inits=None, return_fit=False):
    """Run every chain and keep the one in best agreement with the rest.

    Chains that hit a singular covariance are dropped; if all fail,
    :class:`AllRunsFailed` is raised.
    """
    if inits is None:
        if rng is None:
            rng = SeededRng(0, (EM_INIT_STREAM,))
        inits = chain_inits(ds, config, rng)
    fits, idx = [], []
    for m, init in enumerate(inits):
        try:
            fits.append(run_em_single(ds, init, config))
            idx.append(m)
        except SingularWithinCovariance as exc:
            log.debug("EM chain %d failed: %s", m, exc)
    if not fits:
        raise AllRunsFailed(f"all {len(inits)} EM chains failed")
    pick = median_select([f.whitened.q for f in fits])
    fit = fits[pick]
    fit = EmFit(fit.params, fit.labels, fit.whitened, chain=idx[pick])
    return fit if return_fit else fit.whitened


def em_base(config, rng=None):
    """A base learner closure ``ds -> WhitenedBetween``."""

    def psi(ds):
        return run_em_multistart(ds, config, rng)

    return psi
