import math

import numpy as np
import pytest
from scipy.special import softmax

from msa.core import Dataset
from msa.maxent import (
    FeatureMap,
    MaxentModel,
    decision_threshold,
    maxent_gradient,
    maxent_objective,
    posterior,
    theorem3_radius,
    train_maxent,
)
from conftest import random_domain_data


def _naive_objective(w, data, mu, fmap):
    # direct evaluation over explicit Phi(x, k) vectors, no stabilization
    total = 0.0
    for x, k in zip(data.X, data.domain):
        scores = [math.exp(w @ fmap.phi(x, j, data.p)) for j in range(data.p)]
        total += math.log(scores[k] / sum(scores))
    return mu * (w @ w) - total / data.m


def _central_fd(f, w, h=1e-5):
    g = np.zeros_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (f(w + e) - f(w - e)) / (2 * h)
    return g


@pytest.mark.parametrize("p", [2, 5])
def test_objective_at_zero(p, rng):
    data = random_domain_data(rng, 20, 3, p)
    w = np.zeros(p * 4)
    assert maxent_objective(w, data, 0.7) == pytest.approx(math.log(p), abs=1e-15)


def test_objective_matches_naive(rng):
    for p in (2, 3):
        data = random_domain_data(rng, 15, 2, p)
        fmap = FeatureMap.linear(2)
        w = rng.normal(size=fmap.output_dim(p))
        assert maxent_objective(w, data, 0.3) == pytest.approx(_naive_objective(w, data, 0.3, fmap), abs=1e-12)


def test_objective_requires_domains():
    with pytest.raises(ValueError):
        maxent_objective(np.zeros(4), Dataset(np.zeros((2, 1)), None, None, 2), 0.1)


def test_gradient_symmetric_data_matches_fd():
    X = np.array([[-1.0], [1.0], [-2.0], [2.0]])
    data = Dataset(X, None, np.array([0, 1, 0, 1]), 2)
    w = np.zeros(4)
    g = maxent_gradient(w, data, 0.0)
    # data term is antisymmetric across the two class blocks
    np.testing.assert_allclose(g[:2], -g[2:], atol=1e-15)
    fd = _central_fd(lambda v: maxent_objective(v, data, 0.0), w)
    assert abs(np.linalg.norm(g) - np.linalg.norm(fd)) <= 1e-6


def test_gradient_regularizer_term(rng):
    data = random_domain_data(rng, 10, 2, 3)
    w = np.zeros(9)
    w[0] = 1.0
    diff = maxent_gradient(w, data, 1.0) - maxent_gradient(w, data, 0.0)
    e1 = np.zeros(9)
    e1[0] = 2.0
    np.testing.assert_allclose(diff, e1, atol=1e-15)


def test_gradient_vs_finite_differences(rng):
    for _ in range(20):
        p, d = int(rng.integers(2, 5)), int(rng.integers(1, 5))
        data = random_domain_data(rng, int(rng.integers(p, 50)), d, p)
        w = rng.normal(size=p * (d + 1))
        mu = float(rng.uniform(0, 1))
        g = maxent_gradient(w, data, mu)
        fd = _central_fd(lambda v: maxent_objective(v, data, mu), w)
        assert np.linalg.norm(g - fd) <= 1e-5 * max(np.linalg.norm(fd), 1e-12)


def test_convexity_interpolation(rng):
    data = random_domain_data(rng, 30, 2, 3)
    for _ in range(50):
        w1, w2 = rng.normal(size=9) * 3, rng.normal(size=9) * 3
        t = rng.uniform()
        lhs = maxent_objective(t * w1 + (1 - t) * w2, data, 0.1)
        rhs = t * maxent_objective(w1, data, 0.1) + (1 - t) * maxent_objective(w2, data, 0.1)
        assert lhs <= rhs + 1e-10


def test_trained_first_order_condition(rng):
    data = random_domain_data(rng, 60, 2, 3)
    model = train_maxent(data, 0.05)
    assert model.converged
    assert np.linalg.norm(maxent_gradient(model.w, data, 0.05)) <= 1e-8
    assert maxent_objective(model.w, data, 0.05) <= math.log(3)


def test_identical_domains_uniform_posterior():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(400, 1))
    data = Dataset(np.vstack([x, x]), None, np.repeat([0, 1], 400), 2)
    model = train_maxent(data, 0.1)
    np.testing.assert_allclose(model.predict_proba(np.linspace(-3, 3, 7)[:, None]), 0.5, atol=1e-8)


def test_training_is_deterministic(rng):
    data = random_domain_data(rng, 80, 2, 3)
    a = train_maxent(data, "cv", seed=4)
    b = train_maxent(data, "cv", seed=4)
    assert a.mu == b.mu
    assert np.array_equal(a.w, b.w)


def test_train_errors(rng):
    data = random_domain_data(rng, 10, 1, 2)
    with pytest.raises(ValueError):
        train_maxent(data, -1.0)
    lonely = Dataset(np.zeros((3, 1)), None, np.array([0, 0, 0]), 2)
    with pytest.raises(ValueError, match="domains without samples"):
        train_maxent(lonely, 0.1)


def test_posterior_examples():
    fmap = FeatureMap.linear(1)
    m0 = MaxentModel(np.zeros(6), 0.1, fmap, 3)
    np.testing.assert_allclose(posterior(m0, [2.0]), [1 / 3] * 3, atol=1e-15)
    # logits (a, a): bias only
    m = MaxentModel(np.array([0.0, 4.2, 0.0, 4.2]), 0.1, fmap, 2)
    np.testing.assert_allclose(posterior(m, [1.5]), [0.5, 0.5], atol=1e-15)
    # logits (1, 0)
    m = MaxentModel(np.array([0.0, 1.0, 0.0, 0.0]), 0.1, fmap, 2)
    e = math.e
    np.testing.assert_allclose(posterior(m, [0.3]), [e / (e + 1), 1 / (e + 1)], atol=1e-15)


def test_posterior_shift_invariance(rng):
    fmap = FeatureMap.linear(2)
    W = rng.normal(size=(3, 3))
    shifted = W + np.array([0.0, 0.0, 5.0])  # same bias shift for every class
    X = rng.normal(size=(20, 2))
    a = MaxentModel(W.ravel(), 0.0, fmap, 3).predict_proba(X)
    b = MaxentModel(shifted.ravel(), 0.0, fmap, 3).predict_proba(X)
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(a, softmax(X @ W[:, :2].T + W[:, 2], axis=1), atol=1e-15)


def test_posterior_floor():
    m = MaxentModel(np.array([0.0, 2000.0, 0.0, 0.0]), 0.1, FeatureMap.linear(1), 2)
    q = m.predict_proba([[0.0]])
    assert q[0, 1] == 1e-300


def test_random_fourier_features(rng):
    fmap = FeatureMap.random_fourier(2, 50, 1.0, seed=3)
    X = rng.normal(size=(100, 2))
    B = fmap.base(X)
    assert B.shape == (100, 51)
    # sqrt(2/W) cos(.) entries bound the norm by sqrt(2 + 1)
    assert fmap.norm_bound(X) <= math.sqrt(3) + 1e-12
    data = Dataset(np.vstack([X, X + 3]), None, np.repeat([0, 1], 100), 2)
    model = train_maxent(data, 1e-3, fmap)
    assert maxent_objective(model.w, data, 1e-3, fmap) < math.log(2)


def test_serialization_roundtrip(tmp_path, rng):
    data = random_domain_data(rng, 40, 2, 3)
    model = train_maxent(data, 0.01, seed=9)
    path = tmp_path / "m.json"
    model.save(path)
    back = MaxentModel.load(path)
    assert np.array_equal(back.w, model.w)
    assert back.mu == model.mu and back.p == 3 and back.r == model.r and back.seed == 9
    fmap = FeatureMap.random_fourier(2, 8, 0.5, seed=2)
    rmodel = train_maxent(data, 0.01, fmap)
    back = MaxentModel.from_dict(rmodel.to_dict())
    np.testing.assert_array_equal(back.predict_proba(data.X), rmodel.predict_proba(data.X))


def test_theorem3_radius():
    assert theorem3_radius(0.0, 1.0, 100, 0.1) == 0.0
    assert theorem3_radius(1.0, 1.0, 8, 1 / math.e) == pytest.approx(2.0, abs=1e-12)
    r1 = theorem3_radius(2.0, 0.5, 100, 0.05)
    assert theorem3_radius(2.0, 0.5, 400, 0.05) == pytest.approx(r1 / 2, rel=1e-15)
    with pytest.raises(ValueError):
        theorem3_radius(1.0, 0.0, 10, 0.1)
    with pytest.raises(ValueError):
        theorem3_radius(1.0, 1.0, 0, 0.1)


def test_decision_threshold():
    # logit difference 2x - 1 crosses at 0.5
    m = MaxentModel(np.array([1.0, -0.5, -1.0, 0.5]), 0.1, FeatureMap.linear(1), 2)
    t = decision_threshold(m)
    assert t == pytest.approx(0.5)
    np.testing.assert_allclose(posterior(m, [t]), [0.5, 0.5], atol=1e-15)
