"""Axis-aligned projections: sampling, projecting data, back-projecting scores.

A projection is stored as its sorted coordinate set.  Row order does not
matter because the base learners are permutation equivariant.
"""
from dataclasses import dataclass

import numpy as np

from .dataset import LabeledDataset
from .errors import DimensionMismatch, InvalidDimension

# stream tags keep projection draws and EM initialisations on disjoint substreams
PROJECTION_STREAM = 0
EM_INIT_STREAM = 1


@dataclass(frozen=True)
class SeededRng:
    """A reproducible substream keyed by ``(seed, key)``.

    Draws depend only on the pair, never on how many other streams were used
    before, so the projection sweep can run in any order.
    """

    seed: int
    key: tuple = ()

    def generator(self):
        ss = np.random.SeedSequence(entropy=int(self.seed) & (2**64 - 1),
                                    spawn_key=tuple(int(k) for k in self.key))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, *key):
        return SeededRng(self.seed, self.key + tuple(key))


@dataclass(frozen=True)
class Projection:
    indices: np.ndarray
    p: int

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size == 0 or idx.size > self.p:
            raise InvalidDimension(f"need 1 <= d <= p, got d={idx.size}, p={self.p}")
        if np.any(np.diff(idx) <= 0):
            raise InvalidDimension("projection indices must be strictly increasing")
        if idx[0] < 0 or idx[-1] >= self.p:
            raise InvalidDimension(f"projection indices must lie in [0, {self.p})")
        idx.flags.writeable = False
        object.__setattr__(self, "indices", idx)

    @property
    def d(self):
        return self.indices.size

    def matrix(self):
        """Dense d x p selection matrix (for checks; never used in the sweep)."""
        P = np.zeros((self.d, self.p))
        P[np.arange(self.d), self.indices] = 1.0
        return P

    def __eq__(self, other):
        return (isinstance(other, Projection) and self.p == other.p
                and np.array_equal(self.indices, other.indices))

    def __hash__(self):
        return hash((self.p, self.indices.tobytes()))


def _partial_fisher_yates(gen, p, d, size=None):
    """Uniform d-subsets of range(p): ``size`` rows (or one row) of a partial shuffle.

    Swap tables are sparse so only touched positions are materialised.
    """
    shape = (d,) if size is None else (size, d)
    picks = gen.integers(np.arange(d), p, size=shape).reshape(-1, d)
    out = np.empty(picks.shape, dtype=np.int64)
    for r, row in enumerate(picks.tolist()):
        table = {}
        for i, j in enumerate(row):
            vi = table.get(i, i)
            out[r, i] = table.get(j, j)
            table[j] = vi
    return out[0] if size is None else out


def sample_projection(rng, p, d):
    """Uniform d-subset of range(p), returned sorted."""
    if not 1 <= d <= p:
        raise InvalidDimension(f"need 1 <= d <= p, got d={d}, p={p}")
    gen = rng.generator() if isinstance(rng, SeededRng) else rng
    return Projection(np.sort(_partial_fisher_yates(gen, p, d)), p)


def sample_group(seed, p, d, a, B):
    """The B index sets of group ``a``, drawn from the substream keyed (0, a)."""
    gen = SeededRng(seed, (PROJECTION_STREAM, int(a))).generator()
    return np.sort(_partial_fisher_yates(gen, p, d, size=B), axis=1)


def sample_projection_indices(seed, p, d, A, B):
    """Index array of shape (A, B, d) for the whole sweep.

    Each group has its own substream, so group ``a`` is the same whatever A is
    and groups can be drawn in any order.
    """
    if not 1 <= d <= p:
        raise InvalidDimension(f"need 1 <= d <= p, got d={d}, p={p}")
    if A < 1 or B < 1:
        raise InvalidDimension(f"need A, B >= 1 (got A={A}, B={B})")
    return np.stack([sample_group(seed, p, d, a, B) for a in range(A)])


def project(ds: LabeledDataset, pr: Projection):
    if pr.p != ds.p:
        raise DimensionMismatch(f"projection is for p={pr.p}, dataset has p={ds.p}")
    names = None if ds.feature_names is None else tuple(ds.feature_names[j] for j in pr.indices)
    return ds.with_x(ds.x[:, pr.indices], names)


def back_project_diag(q, pr: Projection, p=None):
    """Place diag(q) at the projection's coordinates of a length-p zero vector."""
    q = getattr(q, "q", q)
    q = np.asarray(q, dtype=float)
    p = pr.p if p is None else p
    if q.shape != (pr.d, pr.d) or p != pr.p:
        raise DimensionMismatch(f"q is {q.shape}, projection has d={pr.d}, p={pr.p}")
    out = np.zeros(p)
    out[pr.indices] = np.diag(q)
    return out
