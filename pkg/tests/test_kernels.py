"""Compiled kernels against their numpy/scipy counterparts."""
import numpy as np
import pytest
from scipy.cluster.hierarchy import fcluster, ward

from conftest import random_labeled
from sharpssl import _kernels
from sharpssl.base_em import (
    EmConfig,
    EmParams,
    _hierarchical_init_numpy,
    run_em_multistart,
    run_em_single,
)
from sharpssl.base_lda import lda_base
from sharpssl.evaluation import misclustering_rate


@pytest.mark.parametrize("seed", range(25))
def test_ward_matches_scipy(seed):
    gen = np.random.default_rng(seed)
    n = int(gen.integers(5, 60))
    K = int(gen.integers(2, 6))
    z = gen.standard_normal((n, int(gen.integers(1, 4))))
    ours = _kernels.ward_cut(z, K) + 1
    ref = fcluster(ward(z), K, criterion="maxclust")
    assert misclustering_rate(ref, ours, max(K, ref.max(), ours.max())) == 0.0


def test_hierarchical_init_kernel_matches_numpy(rng):
    for _ in range(10):
        ds, _ = random_labeled(rng, 40, 3, 3, gamma=0.3)
        m1, s1, c1 = _kernels.hierarchical_init(ds.x, ds.y, 3)
        m2, s2, c2 = _hierarchical_init_numpy(ds.x, ds.y, 3)
        assert np.allclose(m1, m2, atol=1e-12) and np.allclose(s1, s2, atol=1e-12) and c1 == c2


def test_align_to_labels():
    clusters = np.array([0, 0, 1, 1, 2, 2])
    y = np.array([3, 0, 1, 0, 2, 0])
    assert _kernels.align_to_labels(clusters, y, 3).tolist() == [2, 0, 1]


def test_lda_cell_matches_module(rng):
    ds, _ = random_labeled(rng, 50, 4, 3, gamma=0.5)
    q, status = _kernels.lda_cell(ds.x, ds.y, 3)
    assert status == _kernels.OK
    assert np.allclose(q, lda_base(ds).q, atol=1e-10)
    _, status = _kernels.lda_cell(ds.x, np.zeros(50, dtype=np.int64), 3)
    assert status == _kernels.NO_LABELS


def test_em_general_matches_module(rng):
    for _ in range(5):
        ds, _ = random_labeled(rng, 70, 3, 3, gamma=0.1)
        init = EmParams(rng.standard_normal((3, 3)), np.eye(3))
        fit = run_em_single(ds, init, EmConfig(T=40, init="user"))
        q, means, sigma, resp, status = _kernels.em_general(ds.x, ds.y, 3, init.means,
                                                            init.sigma, 40, 0.0)
        assert status == _kernels.OK
        assert np.allclose(q, fit.whitened.q, atol=1e-8)
        assert np.allclose(sigma, fit.params.sigma, atol=1e-8)
        assert np.allclose(means, fit.params.means, atol=1e-8)
        assert np.allclose(resp, fit.labels.L, atol=1e-8)


def test_em_cell_multistart_matches_module(rng):
    ds, _ = random_labeled(rng, 60, 2, 2, gamma=0.2)
    inits = [EmParams(rng.standard_normal((2, 2)), np.eye(2)) for _ in range(4)]
    for variant, code in (("general", 0), ("symmetric", 1)):
        ref = run_em_multistart(ds, EmConfig(M=4, T=20, variant=variant, init="user"), inits=inits).q
        means0 = np.stack([i.means for i in inits])
        sigma0 = np.stack([i.sigma for i in inits])
        q, status = _kernels.em_cell(ds.x, ds.y, 2, code, False, means0, sigma0, 20, 0.0)
        assert status == _kernels.OK
        assert np.allclose(q, ref, atol=1e-8), variant


def test_jacobi_and_cholesky(rng):
    g = rng.standard_normal((6, 6))
    a = g @ g.T
    w, v = _kernels.jacobi_eigh(a)
    assert np.allclose(w, np.linalg.eigvalsh(a)[::-1])
    L, ok = _kernels.cholesky(a + np.eye(6), _kernels.PIVOT_REL_TOL)
    assert ok and np.allclose(L @ L.T, a + np.eye(6))
    _, ok = _kernels.cholesky(np.ones((3, 3)), _kernels.PIVOT_REL_TOL)
    assert not ok
