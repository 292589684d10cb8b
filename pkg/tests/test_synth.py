import configparser
import itertools

import numpy as np
import pytest
from scipy.stats import norm

from sharpssl.errors import ConfigError, InvalidDimension
from sharpssl.synth import (
    MixtureSpec,
    bayes_risk,
    bayes_rule,
    build_figure2_spec,
    build_two_class_spec,
    haar_orthogonal,
    sample,
    spec_from_config,
    spec_to_config,
)


def test_figure2_pairwise_distances():
    spec = build_figure2_spec(10, 3.0)
    assert spec.isotropic and spec.s0 == 3
    for i, j in itertools.combinations(range(3), 2):
        assert np.linalg.norm(spec.means[i] - spec.means[j]) == pytest.approx(3.0, abs=1e-12)
    unscaled = build_figure2_spec(10, np.sqrt(6.0)).means
    assert np.allclose(np.abs(unscaled[:, :3]).max(), 1.0)


def test_figure2_anisotropic_scale():
    diag_means = [np.trace(build_figure2_spec(20, 3.0, "anisotropic", seed).sigma_w) / 20
                  for seed in range(100)]
    assert 0.9 <= np.mean(diag_means) <= 1.1
    spec = build_figure2_spec(8, 3.0, "anisotropic", 1)
    assert not spec.isotropic and np.all(np.linalg.eigvalsh(spec.sigma_w) > 0)


def test_haar_is_orthogonal():
    V = haar_orthogonal(6, np.random.default_rng(0))
    assert np.allclose(V.T @ V, np.eye(6))


def test_two_class_scale():
    spec = build_two_class_spec(5, 3, 1.5)
    assert spec.means[0, 0] == pytest.approx(1.5 / (2 * np.sqrt(3)))
    assert spec.means[0, 0] == pytest.approx(0.4330, abs=1e-4)
    assert np.linalg.norm(spec.means[0] - spec.means[1]) == pytest.approx(1.5)
    assert spec.support.tolist() == [0, 1, 2]
    assert np.all(build_two_class_spec(3, 3, 1.0).means != 0)
    zero = build_two_class_spec(4, 2, 0.0)
    assert np.all(zero.means == 0)
    assert bayes_risk(zero, 20000, 1).risk == pytest.approx(0.5, abs=0.02)
    with pytest.raises(InvalidDimension):
        build_two_class_spec(3, 4, 1.0)


def test_sample_gamma_extremes():
    spec = build_two_class_spec(3, 3, 2.0)
    ds, truth = sample(spec.with_gamma(1.0), 50, 1)
    assert np.array_equal(ds.y, truth)
    ds, truth = sample(spec, 50, 1)
    assert np.all(ds.y == 0) and set(truth.tolist()) <= {1, 2}


def test_sample_class_frequencies():
    ds, truth = sample(build_figure2_spec(3, 1.0), 10_000, 2)
    assert np.all(np.abs(np.bincount(truth)[1:] / 10_000 - 1 / 3) <= 0.02)


def test_sample_covariance():
    spec = build_figure2_spec(4, 2.0, "anisotropic", 3)
    ds, truth = sample(spec, 40_000, 4)
    r = ds.x - spec.means[truth - 1]
    assert np.allclose(np.cov(r.T), spec.sigma_w, atol=0.05)


def test_bayes_risk_closed_form():
    spec = build_two_class_spec(4, 2, 2.0)
    est = bayes_risk(spec, 100_000, 5)
    exact = norm.cdf(-np.linalg.norm(spec.means[0]))
    assert abs(est.risk - exact) <= 3 * est.stderr


def test_bayes_risk_limits():
    same = MixtureSpec(np.zeros((3, 2)), np.eye(2))
    est = bayes_risk(same, 30_000, 6)
    assert est.risk == pytest.approx(2 / 3, abs=4 * est.stderr)
    assert bayes_risk(build_figure2_spec(5, 30.0), 20_000, 7).risk == 0.0


def test_bayes_rule_uses_covariance():
    spec = MixtureSpec(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 0.9], [0.9, 1.0]]))
    # class 2 iff x1 - 0.9 x2 > 0.5; nearest-mean would say the opposite for both points
    assert bayes_rule(spec, np.array([[0.4, -0.5], [0.6, 0.5]])).tolist() == [2, 1]


def test_spec_validation():
    with pytest.raises(ConfigError):
        MixtureSpec(np.zeros((2, 2)), np.eye(2), priors=[0.3, 0.3])
    with pytest.raises(InvalidDimension):
        MixtureSpec(np.zeros((2, 2)), np.eye(3))
    with pytest.raises(ConfigError):
        MixtureSpec(np.zeros((2, 2)), np.eye(2), gamma=1.5)


def test_spec_config_roundtrip(tmp_path):
    spec = MixtureSpec(np.array([[1.0, 0.0, -0.5], [0.0, 2.0, 0.0]]), np.diag([1.0, 2.0, 0.5]),
                       priors=[0.25, 0.75], gamma=0.1)
    path = tmp_path / "spec.ini"
    with path.open("w") as fh:
        spec_to_config(spec).write(fh)
    back = spec_from_config(path)
    assert np.array_equal(back.means, spec.means)
    assert np.array_equal(back.sigma_w, spec.sigma_w)
    assert np.array_equal(back.priors, spec.priors) and back.gamma == 0.1
    bad = configparser.ConfigParser()
    bad["mixture"] = {"K": "2", "p": "2", "mean1": "5:1.0"}
    with pytest.raises(ConfigError):
        spec_from_config(bad)
    with pytest.raises(ConfigError):
        spec_from_config(tmp_path / "missing.ini")


def test_haar_first_column_uniform():
    from scipy.stats import kstest

    gen = np.random.default_rng(12)
    first = np.array([haar_orthogonal(3, gen)[:, 0] for _ in range(4000)])
    # for a uniform point on S^2 each coordinate is Uniform(-1, 1)
    assert kstest(first[:, 2], "uniform", args=(-1, 2)).pvalue > 1e-3


def test_bayes_risk_affine_invariance():
    spec = build_figure2_spec(4, 2.0)
    gen = np.random.default_rng(13)
    A = gen.standard_normal((4, 4)) + 2 * np.eye(4)
    moved = MixtureSpec(spec.means @ A.T, A @ spec.sigma_w @ A.T)
    r1 = bayes_risk(spec, 60_000, 1)
    r2 = bayes_risk(moved, 60_000, 2)
    assert abs(r1.risk - r2.risk) <= 4 * np.hypot(r1.stderr, r2.stderr)
