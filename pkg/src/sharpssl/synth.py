"""Synthetic Gaussian-mixture benchmarks and Monte Carlo Bayes risk."""
import configparser
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy.linalg import cho_solve

from .dataset import LabeledDataset
from .errors import ConfigError, InvalidDimension


@dataclass(frozen=True, eq=False)
class MixtureSpec:
    means: np.ndarray          # K x p
    sigma_w: np.ndarray        # p x p
    priors: np.ndarray = None
    gamma: float = 0.0
    isotropic: bool = field(default=False)

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        K, p = means.shape
        sigma = np.asarray(self.sigma_w, dtype=float)
        if sigma.shape != (p, p):
            raise InvalidDimension(f"sigma_w must be {p}x{p}")
        priors = np.full(K, 1.0 / K) if self.priors is None else np.asarray(self.priors, float)
        if priors.shape != (K,) or np.any(priors < 0) or abs(priors.sum() - 1) > 1e-12:
            raise ConfigError("priors must be a probability vector of length K")
        if not 0.0 <= self.gamma <= 1.0:
            raise ConfigError("gamma must lie in [0, 1]")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigma_w", sigma)
        object.__setattr__(self, "priors", priors)
        if not self.isotropic and np.array_equal(sigma, np.eye(p)):
            object.__setattr__(self, "isotropic", True)

    @property
    def K(self):
        return self.means.shape[0]

    @property
    def p(self):
        return self.means.shape[1]

    @property
    def support(self):
        """Coordinates where some class mean is non-zero."""
        return np.flatnonzero(np.any(self.means != 0, axis=0))

    @property
    def s0(self):
        return int(self.support.size)

    @cached_property
    def chol(self):
        return np.eye(self.p) if self.isotropic else np.linalg.cholesky(self.sigma_w)

    def with_gamma(self, gamma):
        return MixtureSpec(self.means, self.sigma_w, self.priors, gamma, self.isotropic)


def haar_orthogonal(p, gen):
    """Haar-distributed p x p orthogonal matrix (QR with positive-diagonal fix)."""
    Q, R = np.linalg.qr(gen.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def _generator(rng):
    if rng is None:
        return np.random.default_rng()
    if hasattr(rng, "generator"):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return np.random.default_rng(int(rng))
    return rng


def build_figure2_spec(p, snr, variant="isotropic", rng=None, gamma=0.05):
    """Three classes on coordinates 0..2 with every pairwise mean distance = snr.

    The anisotropic variant uses Sw = V diag(U[0,2]) V^T with Haar V, whose
    expected trace / p is 1, so the same scale applies in both cases.
    """
    if p < 3:
        raise InvalidDimension("figure-2 designs need p >= 3")
    if not snr > 0:
        raise ConfigError("snr must be positive")
    a = snr / np.sqrt(6.0)
    means = np.zeros((3, p))
    means[0, :3] = (1, 1, 0)
    means[1, :3] = (-1, 0, 1)
    means[2, :3] = (0, -1, -1)
    means *= a
    if variant == "isotropic":
        return MixtureSpec(means, np.eye(p), gamma=gamma, isotropic=True)
    if variant != "anisotropic":
        raise ConfigError(f"unknown variant {variant!r}")
    gen = _generator(rng)
    V = haar_orthogonal(p, gen)
    lam = gen.uniform(0.0, 2.0, size=p)
    sigma = (V * lam) @ V.T
    return MixtureSpec(means, 0.5 * (sigma + sigma.T), gamma=gamma)


def build_two_class_spec(p, s, snr, gamma=0.0):
    """mu_1 = -mu_2 = a (1_s, 0), Sw = I, with ||mu_1 - mu_2|| = snr."""
    if not 1 <= s <= p:
        raise InvalidDimension(f"need 1 <= s <= p (s={s}, p={p})")
    if snr < 0:
        raise ConfigError("snr must be non-negative")
    a = snr / (2.0 * np.sqrt(s))
    means = np.zeros((2, p))
    means[0, :s] = a
    means[1, :s] = -a
    return MixtureSpec(means, np.eye(p), gamma=gamma, isotropic=True)


def sample(spec, n, rng=None):
    """Draw n rows.  Returns ``(dataset, true_labels)``; each label is revealed
    independently with probability ``spec.gamma``."""
    if n < 1:
        raise ConfigError("n must be positive")
    gen = _generator(rng)
    truth = gen.choice(spec.K, size=n, p=spec.priors) + 1
    noise = gen.standard_normal((n, spec.p))
    if not spec.isotropic:
        noise = noise @ spec.chol.T
    x = spec.means[truth - 1] + noise
    observed = gen.random(n) < spec.gamma
    y = np.where(observed, truth, 0)
    return LabeledDataset(x, y, spec.K), truth.astype(np.int64)


class RiskEstimate(NamedTuple):
    risk: float
    stderr: float


def bayes_rule(spec, x):
    """Oracle labels argmax_k log pi_k - (x - nu_k)^T Sw^-1 (x - nu_k) / 2."""
    if spec.isotropic:
        W = spec.means.T
    else:
        W = cho_solve((spec.chol, True), spec.means.T)
    offs = -0.5 * np.sum(spec.means.T * W, axis=0)
    with np.errstate(divide="ignore"):
        scores = x @ W + offs + np.log(spec.priors)
    return np.argmax(scores, axis=1) + 1


def bayes_risk(spec, n_mc=100_000, rng=None, batch=20_000):
    """Monte Carlo misclassification rate of the oracle rule, with its standard error."""
    if n_mc < 1:
        raise ConfigError("n_mc must be positive")
    gen = _generator(rng)
    full = spec.with_gamma(0.0)
    errors = 0
    done = 0
    while done < n_mc:
        m = min(batch, n_mc - done)
        ds, truth = sample(full, m, gen)
        errors += int(np.sum(bayes_rule(spec, ds.x) != truth))
        done += m
    r = errors / n_mc
    return RiskEstimate(r, float(np.sqrt(r * (1 - r) / n_mc)))


# ---------------------------------------------------------------------------
# spec files (INI): [mixture] section with K, p, gamma, optional priors, and
# one "mean<k> = j:v, j:v" line per class; sigma_w is identity unless a
# "sigma_diag" list is given.
# ---------------------------------------------------------------------------

def spec_from_config(path_or_parser):
    cp = path_or_parser
    if not isinstance(cp, configparser.ConfigParser):
        cp = configparser.ConfigParser()
        if not cp.read(path_or_parser):
            raise ConfigError(f"cannot read spec file {path_or_parser}")
    if "mixture" not in cp:
        raise ConfigError("spec file needs a [mixture] section")
    sec = cp["mixture"]
    try:
        K = sec.getint("K")
        p = sec.getint("p")
        gamma = sec.getfloat("gamma", 0.0)
        means = np.zeros((K, p))
        for k in range(K):
            entry = sec.get(f"mean{k + 1}", "")
            for item in filter(None, (t.strip() for t in entry.split(","))):
                j, v = item.split(":")
                means[k, int(j)] = float(v)
        sigma = np.eye(p)
        if "sigma_diag" in sec:
            diag = [float(t) for t in sec["sigma_diag"].split(",")]
            sigma = np.diag(diag)
        priors = None
        if "priors" in sec:
            priors = [float(t) for t in sec["priors"].split(",")]
    except (TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed spec file: {exc}") from None
    return MixtureSpec(means, sigma, priors, gamma)


def spec_to_config(spec):
    if not np.allclose(spec.sigma_w, np.diag(np.diag(spec.sigma_w))):
        raise ConfigError("only diagonal within-class covariances can be written to a spec file")
    cp = configparser.ConfigParser()
    cp["mixture"] = {
        "K": str(spec.K),
        "p": str(spec.p),
        "gamma": repr(float(spec.gamma)),
        "priors": ", ".join(repr(float(v)) for v in spec.priors),
        "sigma_diag": ", ".join(repr(float(v)) for v in np.diag(spec.sigma_w)),
    }
    for k in range(spec.K):
        nz = np.flatnonzero(spec.means[k])
        cp["mixture"][f"mean{k + 1}"] = ", ".join(f"{j}:{float(spec.means[k, j])!r}" for j in nz)
    return cp
