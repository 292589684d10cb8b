"""Labeled-data base learner: whitened between-class covariance from class moments."""
from dataclasses import dataclass

import numpy as np

from .errors import NoLabeledData
from .linalg import solve_spd


@dataclass(frozen=True)
class WhitenedBetween:
    """An estimate Q of Sw^-1 Sb for one projected dataset, plus its trace."""

    q: np.ndarray
    trace: float

    @classmethod
    def from_matrix(cls, q):
        q = np.asarray(q, dtype=float)
        return cls(q, float(np.trace(q)))

    @property
    def d(self):
        return self.q.shape[0]


@dataclass(frozen=True)
class ClassMoments:
    counts: np.ndarray        # n_k, length K
    class_means: np.ndarray   # K x d, zero rows for empty classes
    grand_mean: np.ndarray
    within: np.ndarray        # d x d
    between: np.ndarray      # d x d

    @property
    def n_labeled(self):
        return int(self.counts.sum())


def class_moments(ds, include_unlabeled_in_grand_mean=True):
    """Per-class means and pooled within/between covariances (denominator n_labeled).

    The grand mean averages *all* rows by default, unlabeled ones included;
    pass ``include_unlabeled_in_grand_mean=False`` for the labeled-only mean.
    Empty classes get a zero mean and carry no weight in the between term.
    """
    z, y, K = ds.x, ds.y, ds.K
    lab = y > 0
    n_lab = int(lab.sum())
    if n_lab == 0:
        raise NoLabeledData("the base learner needs at least one labeled observation")
    onehot = (y[:, None] == np.arange(1, K + 1)[None, :]).astype(float)
    counts = onehot.sum(axis=0)
    sums = onehot.T @ z
    means = np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)
    mu = z.mean(axis=0) if include_unlabeled_in_grand_mean else z[lab].mean(axis=0)
    resid = z[lab] - means[y[lab] - 1]
    within = resid.T @ resid / n_lab
    dev = means - mu
    between = (dev * (counts / n_lab)[:, None]).T @ dev
    within = 0.5 * (within + within.T)
    between = 0.5 * (between + between.T)
    return ClassMoments(counts, means, mu, within, between)


def lda_base(ds):
    """Q = Sw^-1 Sb from the labeled rows; raises SingularWithinCovariance if Sw is singular."""
    m = class_moments(ds)
    return WhitenedBetween.from_matrix(solve_spd(m.within, m.between))


def lda_predict(train, z=None):
    """Linear discriminant labels (1..K) with class-proportion priors.

    Fits on the labeled rows of ``train`` and classifies ``z`` (default: the
    training covariates).  Labeled training rows keep their observed label
    when ``z`` is omitted.
    """
    m = class_moments(train, include_unlabeled_in_grand_mean=False)
    pts = train.x if z is None else np.asarray(z, dtype=float)
    W = solve_spd(m.within, m.class_means.T)           # d x K
    offs = -0.5 * np.einsum("kd,dk->k", m.class_means, W)
    with np.errstate(divide="ignore"):
        logprior = np.log(m.counts / m.counts.sum())
    scores = pts @ W + offs + logprior
    pred = np.argmax(scores, axis=1) + 1
    if z is None:
        pred = np.where(train.y > 0, train.y, pred)
    return pred.astype(np.int64)
