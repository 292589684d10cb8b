"""Variable selection by ensembles of axis-aligned random projections.

For each of A groups, B random d-subsets of the coordinates are scored by
the trace of a base learner's whitened between-class covariance estimate;
the best projection of every group is back-projected onto the p coordinates
and the diagonals are averaged into an importance vector.  The top-ell
coordinates are then handed to a low-dimensional learner for labels.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from ._accel import use_numba
from .base_em import EmConfig, chain_inits, run_em_multistart
from .base_lda import WhitenedBetween, lda_base, lda_predict
from .errors import ConfigError, DataError, GroupFailed, InvalidDimension, NumericalError
from .linalg import solve_spd
from .projections import (
    EM_INIT_STREAM,
    Projection,
    SeededRng,
    back_project_diag,
    sample_group,
    sample_projection_indices,
)

log = logging.getLogger(__name__)

DEFAULT_A = 150
DEFAULT_B = 75

Base = Union[str, EmConfig, Callable]


@dataclass(frozen=True)
class SharpConfig:
    d: int
    ell: int
    A: int = DEFAULT_A
    B: int = DEFAULT_B
    base: Base = "lda"
    seed: int = 0
    random_ties: bool = False

    def __post_init__(self):
        if self.A < 1 or self.B < 1:
            raise ConfigError(f"need A, B >= 1 (got A={self.A}, B={self.B})")
        if self.d < 1 or self.ell < 1:
            raise ConfigError("d and ell must be positive")
        if not (self.base == "lda" or isinstance(self.base, EmConfig) or callable(self.base)):
            raise ConfigError(f"unknown base learner {self.base!r}")

    def validate(self, ds):
        bound = min(ds.p, ds.n - ds.K)
        if not 1 <= self.d <= bound:
            raise InvalidDimension(
                f"projected dimension d={self.d} must lie in [1, min(p, n - K)] = [1, {bound}]"
            )
        if not 1 <= self.ell <= ds.p:
            raise InvalidDimension(f"ell={self.ell} must lie in [1, p={ds.p}]")

    @property
    def base_name(self):
        if isinstance(self.base, EmConfig):
            return "em"
        return "lda" if self.base == "lda" else getattr(self.base, "__name__", "custom")


@dataclass(frozen=True)
class GroupWinner:
    group: int
    b: int
    trace: float
    projection: Projection
    q: np.ndarray


@dataclass(frozen=True)
class ImportanceVector:
    w: np.ndarray
    winners: tuple
    failures: int = 0


@dataclass(frozen=True)
class SelectionResult:
    selected: np.ndarray
    importance: ImportanceVector
    final_labels: Optional[np.ndarray] = None
    timings: dict = field(default_factory=dict, compare=False)


class PopulationOracle:
    """Base learner returning the exact projected Q = (P Sw P^T)^-1 P Sb P^T."""

    __name__ = "oracle"

    def __init__(self, sigma_w, sigma_b):
        self.sigma_w = np.asarray(sigma_w, dtype=float)
        self.sigma_b = np.asarray(sigma_b, dtype=float)

    @classmethod
    def from_spec(cls, spec):
        from .evaluation import between_covariance

        return cls(spec.sigma_w, between_covariance(spec))

    def __call__(self, ds, projection):
        ix = np.ix_(projection.indices, projection.indices)
        return WhitenedBetween.from_matrix(solve_spd(self.sigma_w[ix], self.sigma_b[ix]))

    def batch(self, flat):
        """Q for every row of a (C, d) index array at once."""
        rows, cols = flat[:, :, None], flat[:, None, :]
        return np.linalg.solve(self.sigma_w[rows, cols], self.sigma_b[rows, cols])


# ---------------------------------------------------------------------------
# the A x B sweep
# ---------------------------------------------------------------------------

def _cell_inits(ds, em, keys, idx):
    C, d = idx.shape
    K = ds.K
    means0 = np.zeros((C, em.M, K, d))
    sigma0 = np.zeros((C, em.M, d, d))
    for c in range(C):
        sub = ds.with_x(ds.x[:, idx[c]])
        inits = chain_inits(sub, em, keys[c])
        for m, init in enumerate(inits):
            means0[c, m] = init.means
            sigma0[c, m] = init.sigma
    return means0, sigma0


def sweep(ds, config, idx, group_ids=None):
    """Run the base learner on every projection.

    ``idx`` has shape (A, B, d).  Returns ``(qs, ok)`` with qs of shape
    (A, B, d, d) and a boolean success mask of shape (A, B).
    """
    A, B, d = idx.shape
    group_ids = np.arange(A) if group_ids is None else np.asarray(group_ids)
    flat = np.ascontiguousarray(idx.reshape(A * B, d))
    base = config.base
    if base == "lda":
        if use_numba():
            qs, status = _kernels.sweep_lda(ds.x, ds.y, ds.K, flat)
            ok = status == _kernels.OK
        else:
            qs, ok = _sweep_python(ds, flat, lambda sub, pr: lda_base(sub))
    elif isinstance(base, EmConfig):
        keys = [SeededRng(config.seed, (EM_INIT_STREAM, int(group_ids[c // B]), c % B))
                for c in range(A * B)]
        hier = base.init == "hierarchical"
        if base.init == "user":
            raise ConfigError("user-supplied EM starts are not available inside the sweep")
        if hier:
            means0 = np.zeros((A * B, 1, ds.K, d))
            sigma0 = np.zeros((A * B, 1, d, d))
        else:
            means0, sigma0 = _cell_inits(ds, base, keys, flat)
        if use_numba():
            variant = 1 if base.variant == "symmetric" else 0
            if variant == 1 and ds.K != 2:
                raise ConfigError("the symmetric EM variant needs K = 2")
            tol = base.early_stop_tol or 0.0
            qs, status = _kernels.sweep_em(ds.x, ds.y, ds.K, flat, variant, hier,
                                           means0, sigma0, base.T, tol)
            ok = status == _kernels.OK
        else:
            from .base_em import EmParams

            def run(sub, pr, c):
                inits = None
                if not hier:
                    inits = [EmParams(means0[c, m], sigma0[c, m]) for m in range(base.M)]
                return run_em_multistart(sub, base, keys[c], inits=inits)

            qs, ok = _sweep_python(ds, flat, run, with_cell=True)
    elif isinstance(base, PopulationOracle):
        qs, ok = base.batch(flat), np.ones(A * B, dtype=bool)
    elif callable(base):
        qs, ok = _sweep_python(ds, flat, base)
    else:
        raise ConfigError(f"unknown base learner {base!r}")
    return qs.reshape(A, B, d, d), ok.reshape(A, B)


def _sweep_python(ds, flat, fn, with_cell=False):
    C, d = flat.shape
    qs = np.zeros((C, d, d))
    ok = np.zeros(C, dtype=bool)
    for c in range(C):
        pr = Projection(flat[c], ds.p)
        sub = ds.with_x(ds.x[:, flat[c]])
        try:
            res = fn(sub, pr, c) if with_cell else fn(sub, pr)
        except (NumericalError, DataError) as exc:
            log.debug("projection %s failed: %s", flat[c], exc)
            continue
        qs[c] = getattr(res, "q", res)
        ok[c] = True
    return qs, ok


def _winners(qs, ok, idx, p, group_ids):
    A, B = ok.shape
    traces = np.where(ok, np.trace(qs, axis1=2, axis2=3), -np.inf)
    out = []
    for a in range(A):
        if not ok[a].any():
            raise GroupFailed(int(group_ids[a]))
        b = int(np.argmax(traces[a]))   # first maximiser
        out.append(GroupWinner(int(group_ids[a]), b, float(traces[a, b]),
                               Projection(idx[a, b], p), qs[a, b]))
    return out


def score_group(ds, config, a, projections=None):
    """Best projection (largest trace, smallest b on ties) within group ``a``."""
    config.validate(ds)
    if projections is None:
        idx = sample_group(config.seed, ds.p, config.d, a, config.B)[None]
    else:
        idx = np.array([[np.asarray(getattr(pr, "indices", pr)) for pr in projections]])
    qs, ok = sweep(ds, config, idx, group_ids=[a])
    return _winners(qs, ok, idx, ds.p, [a])[0]


def aggregate(winners, p):
    """Average of the back-projected winner diagonals, accumulated in group order."""
    w = np.zeros(p)
    for win in winners:
        w += back_project_diag(win.q, win.projection, p)
    return w / len(winners)


def top_ell(w, ell, tie_rng=None):
    """Indices of the ell largest entries, sorted.  Ties go to the smaller index
    unless ``tie_rng`` is given, in which case they are broken at random."""
    p = w.size
    secondary = np.arange(p) if tie_rng is None else tie_rng.permutation(p)
    order = np.lexsort((secondary, -w))
    return np.sort(order[:ell])


def select_variables(ds, config, projections=None):
    """Importance scores and the top-ell coordinate set.

    ``projections`` optionally overrides the sampler with an (A, B, d) index
    array.
    """
    config.validate(ds)
    t0 = time.perf_counter()
    if projections is None:
        idx = sample_projection_indices(config.seed, ds.p, config.d, config.A, config.B)
    else:
        idx = np.asarray(projections, dtype=np.int64)
        if idx.shape != (config.A, config.B, config.d):
            raise ConfigError(f"projection array must have shape {(config.A, config.B, config.d)}")
        idx = np.sort(idx, axis=2)
    t1 = time.perf_counter()
    qs, ok = sweep(ds, config, idx)
    t2 = time.perf_counter()
    winners = _winners(qs, ok, idx, ds.p, np.arange(config.A))
    w = aggregate(winners, ds.p)
    tie_rng = SeededRng(config.seed, (2,)).generator() if config.random_ties else None
    sel = top_ell(w, config.ell, tie_rng)
    failures = int((~ok).sum())
    if failures:
        log.info("%d of %d projections failed in the base learner", failures, ok.size)
    timings = {"sample": t1 - t0, "sweep": t2 - t1, "aggregate": time.perf_counter() - t2}
    return SelectionResult(sel, ImportanceVector(w, tuple(winners), failures), timings=timings)


def final_labels(ds, selected, final="em", seed=0):
    """Labels 1..K from a low-dimensional learner on the selected coordinates."""
    sub = ds.with_x(ds.x[:, selected])
    if final == "lda":
        return lda_predict(sub)
    em = EmConfig() if final == "em" else final
    if not isinstance(em, EmConfig):
        raise ConfigError(f"unknown final learner {final!r}")
    fit = run_em_multistart(sub, em, SeededRng(seed, (3,)), return_fit=True)
    return fit.labels.hard()


def fit_predict(ds, config, final="em"):
    """Select coordinates, then assign labels on them."""
    res = select_variables(ds, config)
    t = time.perf_counter()
    labels = final_labels(ds, res.selected, final, config.seed)
    timings = dict(res.timings, final=time.perf_counter() - t)
    return SelectionResult(res.selected, res.importance, labels, timings)
