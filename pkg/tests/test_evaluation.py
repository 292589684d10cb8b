import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sharpssl.errors import DimensionMismatch, LengthMismatch
from sharpssl.evaluation import (
    between_covariance,
    discriminant_eigenspace,
    mean_direction_span,
    principal_angles,
    misclustering_rate,
    pair_frobenius_loss,
    population_diagnostics,
    recovery,
    sign_loss,
)
from sharpssl.synth import MixtureSpec, build_figure2_spec, build_two_class_spec


def brute_rate(truth, pred, K):
    best = len(truth)
    for perm in itertools.permutations(range(1, K + 1)):
        relabel = np.array((0,) + perm)
        best = min(best, int(np.sum(relabel[pred] != truth)))
    return best / len(truth)


def test_misclustering_examples():
    t = np.array([1, 1, 2, 2, 3, 3])
    assert misclustering_rate(t, t) == 0.0
    assert misclustering_rate(np.array([1, 2, 2, 1]), np.array([2, 1, 1, 2])) == 0.0
    assert misclustering_rate(t, np.array([2, 2, 3, 3, 1, 2])) == pytest.approx(1 / 6)
    with pytest.raises(LengthMismatch):
        misclustering_rate(t, t[:3])


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda K: st.tuples(
    st.just(K),
    st.lists(st.tuples(st.integers(1, K), st.integers(1, K)), min_size=1, max_size=30))))
def test_hungarian_equals_brute(case):
    K, pairs = case
    t, p = map(np.array, zip(*pairs))
    exact = brute_rate(t, p, K)
    assert misclustering_rate(t, p, K, "hungarian") == exact
    assert misclustering_rate(t, p, K, "brute") == exact


def test_sign_loss():
    mu = np.array([1.0, 2.0])
    assert sign_loss(mu, mu) == 0 and sign_loss(mu, -mu) == 0
    assert sign_loss([1.0, 0.0], [0.0, 1.0]) == pytest.approx(np.sqrt(2))
    with pytest.raises(DimensionMismatch):
        sign_loss([1.0], [1.0, 2.0])


def test_pair_frobenius_loss():
    e1, z = np.array([1.0, 0.0]), np.zeros(2)
    assert pair_frobenius_loss((e1, z), (e1, z)) == 0
    assert pair_frobenius_loss((z, e1), (e1, z)) == 0
    # direct branch sqrt(2), swapped branch sqrt(1 + 1) with different truth
    e2 = np.array([0.0, 1.0])
    assert pair_frobenius_loss((e1, e2), (e1, z)) == pytest.approx(1.0)
    assert pair_frobenius_loss((e2, e1), (e1, z)) == pytest.approx(1.0)


def test_recovery():
    r = recovery([0, 1, 2], [0, 1, 2])
    assert r.contains and r.precision == 1 and r.recall == 1
    r = recovery([0, 1, 2, 5], [0, 1])
    assert r.contains and r.precision == 0.5
    r = recovery([3, 4], [0, 1])
    assert not r.contains and r.recall == 0


def test_population_diagnostics_two_class():
    spec = build_two_class_spec(6, 3, 2.0)
    diag = population_diagnostics(spec)
    nu = spec.means[0]
    assert np.allclose(diag.diag, nu ** 2)
    assert diag.support.tolist() == [0, 1, 2] and diag.s0 == 3
    assert diag.gamma_min == pytest.approx(np.min(nu[:3] ** 2))
    empty = population_diagnostics(MixtureSpec(np.zeros((2, 4)), np.eye(4)))
    assert empty.s0 == 0
    assert population_diagnostics(build_figure2_spec(50, 4.0)).s0 == 3


def test_between_covariance_definition():
    spec = MixtureSpec(np.array([[1.0, 0.0], [0.0, 2.0]]), np.eye(2), priors=[0.25, 0.75])
    nu = spec.priors @ spec.means
    expected = sum(pi * np.outer(m - nu, m - nu) for pi, m in zip(spec.priors, spec.means))
    assert np.allclose(between_covariance(spec), expected)


def test_eigenspace_is_mean_span():
    gen = np.random.default_rng(0)
    g = gen.standard_normal((10, 10))
    spec = MixtureSpec(gen.standard_normal((3, 10)), g @ g.T + np.eye(10))
    U, vals = discriminant_eigenspace(spec)
    V = mean_direction_span(spec)
    assert U.shape == V.shape
    assert principal_angles(U, V).max() < 1e-8
    assert np.all(vals[2:] < 1e-10 * vals[0])


@settings(max_examples=100, deadline=None)
@given(st.integers(2, 5).flatmap(lambda K: st.tuples(
    st.just(K), st.permutations(list(range(1, K + 1))),
    st.lists(st.tuples(st.integers(1, K), st.integers(1, K)), min_size=1, max_size=25))))
def test_misclustering_relabel_invariance(case):
    K, sigma, pairs = case
    s = np.array([0] + list(sigma))
    t, p = map(np.array, zip(*pairs))
    assert misclustering_rate(s[t], s[p], K) == misclustering_rate(t, p, K)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=5).flatmap(
    lambda a: st.tuples(st.just(a), st.lists(st.floats(-5, 5), min_size=len(a), max_size=len(a)))))
def test_sign_loss_symmetric(pair):
    mu, ref = map(np.array, pair)
    assert sign_loss(mu, ref) == sign_loss(-mu, ref)
