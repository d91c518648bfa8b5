import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fdpkit import mech
from fdpkit.curve import (DiscreteDistribution, DominanceOrder, compare, evaluate,
                          from_distribution_pair, identity, invert, make_eps_delta,
                          make_gaussian, make_grid, max_divergence, sup_distance, zero_curve)
from fdpkit.errors import DomainError

GRID = make_grid(4000)


class TestGaussianMechanism:
    def test_zero_sensitivity(self):
        assert sup_distance(mech.gaussian_mechanism(0.0, 1.0), identity()) < 1e-15

    @pytest.mark.parametrize("sens,sigma,mu", [(1, 1, 1.0), (2, 4, 0.5)])
    def test_mu(self, sens, sigma, mu):
        assert mech.gaussian_mechanism(sens, sigma).mu == pytest.approx(mu)

    def test_bad_sigma(self):
        with pytest.raises(DomainError):
            mech.gaussian_mechanism(1.0, 0.0)


class TestPureDp:
    def test_zero(self):
        assert sup_distance(mech.pure_dp_mechanism(0.0), identity()) < 1e-15

    def test_crossing(self):
        assert evaluate(mech.pure_dp_mechanism(math.log(2)), 1 / 3) == pytest.approx(1 / 3)

    def test_max_divergence(self):
        assert max_divergence(mech.pure_dp_mechanism(0.9)) == 0.9


class TestDiscreteGaussian:
    def test_large_sigma_near_identity(self):
        assert sup_distance(mech.discrete_gaussian_curve(50.0, 1), identity()) < 0.02

    def test_sigma1_close_to_continuous(self):
        # recorded distance; see the project notes for the comparison with G_1
        d = sup_distance(mech.discrete_gaussian_curve(1.0, 1), make_gaussian(1.0))
        assert d == pytest.approx(0.0344, abs=5e-4)

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
    def test_symmetric(self, sigma):
        c = mech.discrete_gaussian_curve(sigma, 1)
        xs = np.linspace(0, 1, 2001)
        assert np.max(np.abs(invert(c.to_piecewise())(xs) - c(xs))) < 1e-10

    def test_monotone_in_sigma(self):
        prev = None
        for sigma in [0.5, 1.0, 2.0, 5.0, 20.0]:
            c = mech.discrete_gaussian_curve(sigma, 1)(GRID)
            if prev is not None:
                assert np.all(c >= prev - 1e-12)
            prev = c

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0, 50.0])
    def test_ordering_fixture(self, sigma):
        # recorded relation to the continuous Gaussian of the same scale
        order = compare(mech.discrete_gaussian_curve(sigma, 1), make_gaussian(1.0 / sigma))
        assert order is DominanceOrder.INCOMPARABLE

    def test_tail_budget(self):
        *_, tail = mech.discrete_gaussian_support(2.0, 1)
        assert tail < 1e-20

    def test_bad_shift(self):
        with pytest.raises(DomainError):
            mech.discrete_gaussian_curve(1.0, 0)


class TestSubsampled:
    def test_endpoints(self):
        g = make_gaussian(1.0)
        assert sup_distance(mech.subsampled_curve(g, 0.0), identity()) < 1e-15
        assert sup_distance(mech.subsampled_curve(g, 1.0), g) < 1e-15

    def test_zero_base(self):
        c = mech.subsampled_curve(zero_curve(), 0.5)
        xs = np.linspace(0, 1, 101)
        np.testing.assert_allclose(c(xs), 0.5 * (1 - xs), atol=1e-15)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.0, 1.0), st.floats(0.1, 3.0))
    def test_dominates_base(self, p, mu):
        g = make_gaussian(mu)
        assert np.all(mech.subsampled_curve(g, p)(GRID) >= g(GRID) - 1e-12)


class TestMixture:
    def pair(self, p, q):
        return DiscreteDistribution.from_masses(p), DiscreteDistribution.from_masses(q)

    def test_single(self):
        P, Q = self.pair([0.6, 0.3, 0.1], [0.2, 0.3, 0.5])
        assert sup_distance(mech.mixture_bound([(P, Q)], [1.0]),
                            from_distribution_pair(P, Q)) < 1e-15

    def test_identical_components(self):
        P, Q = self.pair([0.6, 0.4], [0.3, 0.7])
        assert sup_distance(mech.mixture_bound([(P, Q)] * 3, [0.2, 0.3, 0.5]),
                            from_distribution_pair(P, Q)) < 1e-15

    def test_binary_components(self):
        (P1, Q1), (P2, Q2) = self.pair([0.8, 0.2], [0.3, 0.7]), self.pair([0.4, 0.6], [0.1, 0.9])
        bound = mech.mixture_bound([(P1, Q1), (P2, Q2)], [0.3, 0.7])
        mixed = from_distribution_pair(
            DiscreteDistribution.from_masses(0.3 * P1.mass + 0.7 * P2.mass),
            DiscreteDistribution.from_masses(0.3 * Q1.mass + 0.7 * Q2.mass))
        assert np.all(bound(GRID) <= mixed(GRID) + 1e-12)

    def test_analytic_component_decomposes(self):
        g, f = make_gaussian(1.0), make_eps_delta(1.0, 0.0)
        from fdpkit.duality import delta_at_eps
        m = mech.mixture_bound([g, f], [0.5, 0.5])
        for eps in [0.5, 1.0, 2.0, 4.0]:
            exact = 0.5 * delta_at_eps(g, eps) + 0.5 * delta_at_eps(f, eps)
            got = delta_at_eps(m, eps)
            assert got >= exact - 1e-12
            assert got == pytest.approx(exact, rel=2e-3)

    @pytest.mark.parametrize("weights", [[0.5], [0.5, 0.6], [-0.1, 1.1]])
    def test_bad_weights(self, weights):
        P, Q = self.pair([0.5, 0.5], [0.2, 0.8])
        with pytest.raises(DomainError):
            mech.mixture_bound([(P, Q)] * len(weights), weights) if len(weights) > 1 else \
                mech.mixture_bound([(P, Q)] * 2, weights)


class TestSpecs:
    @pytest.mark.parametrize("data", [
        {"kind": "Gaussian", "sensitivity": 1.0, "sigma": 2.0},
        {"kind": "PureDP", "eps": 0.5},
        {"kind": "DiscreteGaussian", "sigma": 1.5, "shift": 1},
        {"kind": "Subsampled", "p": 0.1, "base": {"kind": "Gaussian", "sensitivity": 1.0,
                                                  "sigma": 1.0}},
        {"kind": "Mixture", "weights": [0.4, 0.6],
         "components": [{"kind": "PureDP", "eps": 1.0},
                        {"P": [0.7, 0.3], "Q": [0.3, 0.7]}]},
    ])
    def test_round_trip(self, data):
        spec = mech.spec_from_dict(json.loads(json.dumps(data)))
        again = mech.spec_from_dict(spec.to_dict())
        assert sup_distance(spec.curve(), again.curve(), 2000) == 0.0

    def test_unknown_kind(self):
        with pytest.raises(DomainError):
            mech.spec_from_dict({"kind": "Laplace"})


class TestCnd:
    @pytest.mark.parametrize("target", [make_gaussian(0.5), make_gaussian(1.0),
                                        make_gaussian(2.0), make_eps_delta(0.5, 0.0),
                                        make_eps_delta(1.0, 0.0)])
    def test_properties(self, target):
        dist = mech.construct_cnd(target)
        report = mech.validate_cnd(dist)
        assert all(v <= 1e-6 for v in report.values()), report
        assert dist.cdf(0.0) == 0.5

    def test_pure_shift_tradeoff(self):
        target = make_eps_delta(1.0, 0.0)
        dist = mech.construct_cnd(target)
        xs = np.linspace(0, 1, 1001)
        assert np.max(np.abs(dist.shift_tradeoff(1.0, xs) - target(xs))) < 1e-6

    def test_rejects_identity(self):
        with pytest.raises(DomainError):
            mech.construct_cnd(identity())

    def test_quantile_inverts_cdf(self):
        dist = mech.construct_cnd(make_gaussian(1.0))
        u = np.linspace(0.001, 0.999, 999)
        np.testing.assert_allclose(dist.cdf(dist.quantile(u)), u, atol=1e-12)

    def test_sampling(self):
        dist = mech.construct_cnd(make_gaussian(1.0))
        draws = mech.cnd_sample(dist, np.random.default_rng(7), 1_000_000)
        assert abs(np.median(draws)) < 0.01
        frac = np.mean(draws <= 0.0)
        assert abs(frac - 0.5) <= 3 * math.sqrt(0.25 / draws.size)
        again = mech.cnd_sample(dist, np.random.default_rng(7), 1_000_000)
        np.testing.assert_array_equal(draws, again)
