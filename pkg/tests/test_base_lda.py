import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_labeled
from sharpssl.base_lda import class_moments, lda_base, lda_predict
from sharpssl.dataset import LabeledDataset, from_arrays
from sharpssl.errors import NoLabeledData, SingularWithinCovariance


def naive_moments(x, y, K):
    lab = [i for i in range(len(y)) if y[i] > 0]
    n_lab = len(lab)
    d = x.shape[1]
    mu = sum(x[i] for i in range(len(y))) / len(y)
    means = []
    for k in range(1, K + 1):
        rows = [i for i in lab if y[i] == k]
        means.append(sum(x[i] for i in rows) / len(rows) if rows else np.zeros(d))
    sw = np.zeros((d, d))
    sb = np.zeros((d, d))
    for i in lab:
        r = x[i] - means[y[i] - 1]
        sw += np.outer(r, r)
        g = means[y[i] - 1] - mu
        sb += np.outer(g, g)
    return means, mu, sw / n_lab, sb / n_lab


def test_two_point_case():
    m = class_moments(from_arrays(np.array([[-1.0], [1.0]]), [1, 2]))
    assert m.grand_mean[0] == 0 and m.within[0, 0] == 0 and m.between[0, 0] == 1


def test_empty_class_contributes_nothing():
    ds = from_arrays(np.array([[0.0], [2.0], [5.0]]), [1, 1, 0], K=3)
    m = class_moments(ds)
    assert np.all(m.class_means[1:] == 0)
    g = m.class_means[0] - m.grand_mean
    assert np.allclose(m.between, np.outer(g, g))


def test_grand_mean_uses_all_rows():
    ds = from_arrays(np.array([[0.0], [2.0], [10.0]]), [1, 2, 0])
    assert class_moments(ds).grand_mean[0] == 4.0
    assert class_moments(ds, include_unlabeled_in_grand_mean=False).grand_mean[0] == 1.0


def test_matches_naive_loop(rng):
    ds, _ = random_labeled(rng, 40, 3, 3, gamma=0.7)
    m = class_moments(ds)
    means, mu, sw, sb = naive_moments(ds.x, ds.y, 3)
    assert np.allclose(m.class_means, means, atol=1e-12)
    assert np.allclose(m.grand_mean, mu, atol=1e-12)
    assert np.allclose(m.within, sw, atol=1e-12)
    assert np.allclose(m.between, sb, atol=1e-12)


def test_identity_whitening():
    # two labeled points per class symmetric about the class mean: Sw = I exactly
    x = np.array([[-3.0, 1.0], [-1.0, -1.0], [3.0, 1.0], [1.0, -1.0]])
    ds = from_arrays(x, [1, 1, 2, 2])
    m = class_moments(ds)
    assert np.allclose(m.within, np.eye(2))
    assert np.allclose(lda_base(ds).q, m.between)


def test_population_limit(rng):
    n = 5000
    truth = rng.integers(1, 3, n)
    x = np.where(truth[:, None] == 1, -1.0, 1.0) * np.array([1.0, 0.0]) + rng.standard_normal((n, 2))
    q = lda_base(from_arrays(x, truth)).q
    assert np.linalg.norm(q - np.diag([1.0, 0.0]), 2) <= 0.1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32))
def test_permutation_equivariance(seed):
    gen = np.random.default_rng(seed)
    d = int(gen.integers(1, 5))
    ds, _ = random_labeled(gen, 30, d, 2, gamma=0.8)
    perm = gen.permutation(d)
    q = lda_base(ds).q
    qp = lda_base(ds.with_x(ds.x[:, perm])).q
    assert np.allclose(qp, q[np.ix_(perm, perm)], atol=1e-10)


def test_errors():
    with pytest.raises(NoLabeledData):
        lda_base(from_arrays(np.ones((3, 1)), [0, 0, 0]))
    with pytest.raises(SingularWithinCovariance):
        lda_base(from_arrays(np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]]), [1, 1, 2, 2]))


def test_lda_predict(rng):
    ds, truth = random_labeled(rng, 200, 2, 2, gamma=1.0, shift=4.0)
    pred = lda_predict(ds)
    assert np.array_equal(pred, ds.y)
    unl = LabeledDataset(ds.x, np.where(np.arange(200) < 100, ds.y, 0), 2)
    pred = lda_predict(unl)
    assert np.mean(pred[100:] == truth[100:]) > 0.95


def test_trace_and_label_invariance(rng):
    ds, _ = random_labeled(rng, 60, 3, 3, gamma=0.6)
    q = lda_base(ds).q
    perm = rng.permutation(3)
    assert lda_base(ds.with_x(ds.x[:, perm])).trace == pytest.approx(np.trace(q), abs=1e-12)
    relabel = np.array([0, 3, 1, 2])
    assert np.allclose(lda_base(LabeledDataset(ds.x, relabel[ds.y], 3)).q, q, atol=1e-12)


def test_rate_over_three_sample_sizes():
    from sharpssl.evaluation import between_covariance
    from sharpssl.linalg import op_norm
    from sharpssl.synth import build_two_class_spec, sample

    spec = build_two_class_spec(3, 2, 2.0, gamma=1.0)
    Q = between_covariance(spec)
    med = []
    for n in (500, 2000, 8000):
        med.append(np.median([op_norm(lda_base(sample(spec, n, 100 * n + r)[0]).q - Q)
                              for r in range(50)]))
    for a, b in zip(med, med[1:]):
        assert 1.4 <= a / b <= 2.9
