import math

import numpy as np
import pytest

from msa.renyi import (
    BoundInputs,
    FiniteDistribution,
    bound_theorem_1_2,
    bound_theorem_4,
    bound_theorem_5_6,
    histogram,
    renyi_d,
    renyi_exp,
    triangle_slack,
)

P = np.array([0.5, 0.5])
Q = np.array([0.25, 0.75])


def _direct_d_alpha(p, q, alpha):
    # plain summation of p^a / q^(a-1), no log-space tricks
    return sum(pi**alpha / qi ** (alpha - 1) for pi, qi in zip(p, q) if pi > 0) ** (1 / (alpha - 1))


def test_identical_distributions():
    R = np.array([0.1, 0.2, 0.7])
    for alpha in (0, 0.5, 1, 2, 7.5, math.inf):
        assert abs(renyi_d(R, R, alpha)) <= 1e-12
    assert renyi_exp(R, R, 2) == pytest.approx(1.0, abs=1e-12)


def test_examples():
    assert renyi_d(P, Q, math.inf) == pytest.approx(math.log(2), abs=1e-15)
    assert renyi_d(P, Q, 2) == pytest.approx(math.log(4 / 3), abs=1e-15)
    assert renyi_exp(P, Q, 2) == pytest.approx(_direct_d_alpha(P, Q, 2), abs=1e-15)
    assert renyi_exp(P, Q, 2) == pytest.approx(4 / 3, abs=1e-15)


@pytest.mark.parametrize("alpha", [1.5, 2.0, 3.0, 10.0])
def test_matches_direct_summation(alpha):
    rng = np.random.default_rng(int(alpha * 10))
    for _ in range(20):
        p, q = rng.dirichlet(np.ones(5)), rng.dirichlet(np.ones(5))
        assert renyi_exp(p, q, alpha) == pytest.approx(_direct_d_alpha(p, q, alpha), rel=1e-12)


def test_infinite_sentinel():
    assert renyi_exp([0.5, 0.5], [1.0, 0.0], 2) == math.inf
    assert renyi_d([0.5, 0.5], [1.0, 0.0], 1) == math.inf
    assert renyi_d([0.5, 0.5], [1.0, 0.0], math.inf) == math.inf
    # alpha < 1 stays finite; alpha = 0 is -log Q(supp P)
    assert renyi_d([0.5, 0.5], [1.0, 0.0], 0) == 0.0
    assert math.isfinite(renyi_d([0.5, 0.5], [1.0, 0.0], 0.5))


def test_zero_mass_terms_ignored():
    assert renyi_d([1.0, 0.0], [0.5, 0.5], 2) == pytest.approx(math.log(2))
    assert renyi_d([1.0, 0.0], [0.5, 0.5], 1) == pytest.approx(math.log(2))


def test_kl_branch():
    p, q = np.array([0.2, 0.3, 0.5]), np.array([0.4, 0.4, 0.2])
    kl = sum(pi * math.log(pi / qi) for pi, qi in zip(p, q))
    assert renyi_d(p, q, 1) == pytest.approx(kl, abs=1e-15)


def test_support_mismatch():
    with pytest.raises(ValueError):
        renyi_d([0.5, 0.5], [1.0], 2)


def test_finite_distribution_validation():
    with pytest.raises(ValueError):
        FiniteDistribution([0.5, 0.6])
    with pytest.raises(ValueError):
        FiniteDistribution([])


def test_histogram_shared_bins():
    d = histogram([0.1, 0.2, 0.8], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(d.probs, [2 / 3, 1 / 3])


def test_monotone_in_alpha():
    rng = np.random.default_rng(0)
    alphas = [0, 0.25, 0.5, 0.9, 1, 1.1, 2, 3, 5, 20, math.inf]
    for _ in range(200):
        p, q = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        vals = [renyi_d(p, q, a) for a in alphas]
        assert all(b >= a - 1e-10 for a, b in zip(vals, vals[1:]))
        assert min(vals) >= -1e-12


def test_continuity_at_one():
    rng = np.random.default_rng(1)
    for _ in range(200):
        p, q = rng.dirichlet(np.ones(6)), rng.dirichlet(np.ones(6))
        kl = renyi_d(p, q, 1)
        assert abs(renyi_d(p, q, 1 - 1e-4) - kl) <= 1e-3
        assert abs(renyi_d(p, q, 1 + 1e-4) - kl) <= 1e-3


# triangle inequality --------------------------------------------------------


def test_triangle_trivial():
    R = np.array([0.3, 0.7])
    assert triangle_slack(R, R, R, 2, 0.5) == pytest.approx(0.0, abs=1e-15)


def test_triangle_r_equals_p():
    # with R = P the right side is d_{alpha/gamma}(P||Q)^(alpha-1) >= d_alpha(P||Q)^(alpha-1)
    rng = np.random.default_rng(2)
    for _ in range(50):
        p, q = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        slack = triangle_slack(p, q, p, 2, 0.5)
        assert renyi_exp(p, q, 3) >= renyi_exp(p, q, 2) - 1e-12
        assert slack >= -1e-12
        assert slack == pytest.approx(renyi_exp(p, q, 3) - renyi_exp(p, q, 2), abs=1e-12)


def test_triangle_infinite():
    assert triangle_slack([0.5, 0.5], [0.5, 0.5], [1.0, 0.0], 2, 0.5) == math.inf


def test_triangle_argument_checks():
    with pytest.raises(ValueError):
        triangle_slack(P, Q, P, 2, 1.0)
    with pytest.raises(ValueError):
        triangle_slack(P, Q, P, 0.3, 0.5)


# bounds ---------------------------------------------------------------------


def test_bound_1_2_examples():
    assert bound_theorem_1_2(BoundInputs(0.0, 0.0, 2.0)) == 0.0
    # hand evaluation: (sqrt(0.1) + 0.01) ** 0.5
    expected = (math.sqrt(0.1) + 0.01) ** 0.5
    assert bound_theorem_1_2(BoundInputs(0.1, 0.01, 2.0, M=1.0)) == pytest.approx(expected, abs=1e-12)
    assert expected == pytest.approx(0.571163, abs=1e-6)


def test_bound_1_2_infinite_alpha_limit():
    assert bound_theorem_1_2(BoundInputs(0.07, 0.0, math.inf, M=3.0)) == pytest.approx(0.07, abs=1e-12)
    # large finite alpha approaches the limit
    assert bound_theorem_1_2(BoundInputs(0.07, 0.0, 1e9, M=3.0)) == pytest.approx(0.07, rel=1e-6)


def test_bound_1_2_hand_case():
    eps, delta, a, M, dh, dt = 0.2, 0.05, 3.0, 2.0, 1.4, 1.1
    eps_hat = (eps * dh) ** (2 / 3) * M ** (1 / 3)
    expected = ((eps_hat + delta) * dt) ** (2 / 3) * M ** (1 / 3)
    got = bound_theorem_1_2(BoundInputs(eps, delta, a, M, d_hat=dh, d_target=dt))
    assert got == pytest.approx(expected, abs=1e-12)


def test_bound_4():
    assert bound_theorem_4(BoundInputs(0.0, 0.0, 2.0), 1.5) == 0.0
    assert bound_theorem_4(BoundInputs(0.3, 0.0, math.inf), 1.0) == pytest.approx(0.3, abs=1e-12)
    eps, delta, a, M, dh, dhp, d2a = 0.1, 0.01, 2.0, 2.0, 1.5, 1.2, 1.3
    eps_hat = math.sqrt(eps * dh) * math.sqrt(M)
    expected = math.sqrt((eps_hat + delta) * dhp) * d2a**0.75 * math.sqrt(M)
    got = bound_theorem_4(BoundInputs(eps, delta, a, M, d_hat=dh, d_hat_prime=dhp), d2a)
    assert got == pytest.approx(expected, abs=1e-12)


def test_bound_inputs_validation():
    with pytest.raises(ValueError):
        BoundInputs(0.1, 0.0, 1.0)
    with pytest.raises(ValueError):
        BoundInputs(0.1, 0.0, 2.0, d_hat=0.5)


def test_bound_5_6():
    # r = 0 removes the exponential factor
    assert bound_theorem_5_6("dmsa", 0.05, 3, 0.0, 100, 0.1, mu=1.0) == pytest.approx(0.15, abs=1e-15)
    expected = 0.05 * 2 * math.exp(6 * math.sqrt(2) / 100 * (1 + math.sqrt(math.log(10))))
    got = bound_theorem_5_6("dmsa", 0.05, 2, 1.0, 10000, 0.1, mu=1.0)
    assert got == pytest.approx(expected, abs=1e-12)
    g_expected = 0.01**0.25 * 2.0**0.75 * math.exp(6 * 1.5 / math.sqrt(2 * 500 / 2) * math.sqrt(math.log(2) + math.log(20)))
    got = bound_theorem_5_6("gmsa", 0.01, 2, 1.5, 500, 0.05, M=2.0)
    assert got == pytest.approx(g_expected, abs=1e-12)
    for kind in ("dmsa", "gmsa"):
        assert bound_theorem_5_6(kind, 0.1, 2, 1.0, 400, 0.1, mu=1.0) <= bound_theorem_5_6(kind, 0.1, 2, 1.0, 100, 0.1, mu=1.0)
    with pytest.raises(ValueError):
        bound_theorem_5_6("dmsa", 0.1, 2, 1.0, 0, 0.1, mu=1.0)
