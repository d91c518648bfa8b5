import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from fdpkit.curve import (DiscreteDistribution, DominanceOrder, PiecewiseLinearCurve,
                          compare, from_distribution_pair, identity, make_eps_delta,
                          make_gaussian, zero_curve)
from fdpkit.duality import (EpsDeltaPoint, curve_from_profile, delta_at_eps, eps_at_delta,
                            hockey_stick, privacy_profile)
from fdpkit.errors import AccountingError, DomainError


def gaussian_hockey_oracle(mu, eps):
    """E_Q (dP/dQ - e^eps)_+ for P = N(mu, 1), Q = N(0, 1) by direct integration."""
    def integrand(x):
        return max(stats.norm.pdf(x - mu) - math.exp(eps) * stats.norm.pdf(x), 0.0)
    lo = eps / mu + mu / 2
    val, _ = integrate.quad(integrand, lo, np.inf, epsabs=1e-14, epsrel=1e-12)
    return val


def test_identity():
    for e in [0.0, 0.5, 3.0]:
        assert delta_at_eps(identity(), e) == 0.0
    assert eps_at_delta(identity(), 0.5) == 0.0


def test_pure_at_its_eps():
    assert delta_at_eps(make_eps_delta(0.8, 0.0), 0.8) == 0.0


@pytest.mark.parametrize("mu,eps", [(1.0, 1.0), (0.5, 0.2), (2.0, 3.0)])
def test_gaussian_against_integral(mu, eps):
    assert delta_at_eps(make_gaussian(mu), eps) == pytest.approx(
        gaussian_hockey_oracle(mu, eps), rel=1e-8)


def test_gaussian_value():
    assert delta_at_eps(make_gaussian(1.0), 1.0) == pytest.approx(0.12694, abs=1e-5)


def test_round_trip():
    d = delta_at_eps(make_gaussian(1.0), 1.0)
    assert eps_at_delta(make_gaussian(1.0), d) == pytest.approx(1.0, abs=1e-9)


def test_zero_curve_infinite():
    assert eps_at_delta(zero_curve(), 0.5) == math.inf


def test_delta_domain():
    with pytest.raises(DomainError):
        eps_at_delta(make_gaussian(1.0), 0.0)
    with pytest.raises(DomainError):
        eps_at_delta(make_gaussian(1.0), 1.5)


def test_piecewise_matches_analytic():
    g = make_gaussian(1.0)
    pwl = g.to_piecewise()
    for eps in [0.0, 0.5, 1.0, 2.0]:
        exact = delta_at_eps(g, eps)
        approx = delta_at_eps(pwl, eps)
        # chords lie above the curve, so the piecewise form is never more pessimistic
        assert approx <= exact + 1e-12
        assert approx == pytest.approx(exact, abs=1e-6)


def test_asymmetric_uses_both_branches():
    f = PiecewiseLinearCurve([0, 0.2, 1], [1, 0.3, 0])
    g = PiecewiseLinearCurve([0, 0.3, 1], [1, 0.2, 0])
    for eps in [0.0, 0.3, 1.0]:
        assert delta_at_eps(f, eps) == pytest.approx(delta_at_eps(g, eps), abs=1e-15)


class TestProfile:
    def test_identity(self):
        prof = privacy_profile(identity(), [0.0, 1.0, 2.0])
        assert np.all(prof.deltas == 0.0)

    def test_gaussian_strictly_decreasing(self):
        prof = privacy_profile(make_gaussian(1.0), [0, 0.5, 1, 2])
        assert np.all(np.diff(prof.deltas) < 0)

    def test_eps_delta_profile(self):
        prof = privacy_profile(make_eps_delta(1.0, 0.1), [0.0, 0.5, 1.0])
        assert prof.deltas[2] == pytest.approx(0.1, abs=1e-15)
        assert np.all(prof.deltas[:2] > 0.1)

    def test_grid_must_increase(self):
        with pytest.raises(DomainError):
            privacy_profile(identity(), [1.0, 0.5])

    def test_point_validation(self):
        with pytest.raises(DomainError):
            EpsDeltaPoint(-1.0, 0.1)
        with pytest.raises(DomainError):
            EpsDeltaPoint(1.0, 1.1)

    def test_envelope_dominated_by_profile_curve(self):
        g = make_gaussian(1.0)
        eps = np.linspace(0.0, 6.0, 121)
        prof = privacy_profile(g, eps)
        env = curve_from_profile(prof.eps, prof.deltas)
        xs = np.linspace(0, 1, 2001)
        assert np.all(env(xs) <= g(xs) + 1e-12)
        assert np.max(g(xs) - env(xs)) < 5e-3


class TestHockeyStick:
    def test_equal(self):
        P = DiscreteDistribution.from_masses([0.1, 0.2, 0.7])
        assert hockey_stick(P, P, 0.0) == 0.0
        assert hockey_stick(P, P, 1.0) == 0.0

    def test_bernoulli_tv(self):
        P = DiscreteDistribution.from_masses([0.75, 0.25])
        Q = DiscreteDistribution.from_masses([0.25, 0.75])
        assert hockey_stick(P, Q, 0.0) == pytest.approx(0.5)

    def test_pure_pair(self):
        eps = 0.9
        a = math.exp(eps) / (1 + math.exp(eps))
        P = DiscreteDistribution.from_masses([a, 1 - a])
        Q = DiscreteDistribution.from_masses([1 - a, a])
        assert hockey_stick(P, Q, eps) == pytest.approx(0.0, abs=1e-15)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=6, max_size=6), st.floats(0.0, 3.0))
def test_duality_consistency(w, eps):
    p = np.array(w[:3]) / sum(w[:3])
    q = np.array(w[3:]) / sum(w[3:])
    P, Q = DiscreteDistribution.from_masses(p), DiscreteDistribution.from_masses(q)
    curve = from_distribution_pair(P, Q)
    both = max(hockey_stick(P, Q, eps), hockey_stick(Q, P, eps))
    assert delta_at_eps(curve, eps) == pytest.approx(both, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 3.0), st.floats(0.05, 3.0))
def test_dominance_transfers(mu1, mu2):
    f, g = make_gaussian(min(mu1, mu2)), make_gaussian(max(mu1, mu2))
    assert compare(f, g, 2000) in (DominanceOrder.DOMINATES, DominanceOrder.EQUAL)
    for eps in [0.0, 0.5, 1.0, 2.0]:
        assert delta_at_eps(f, eps) <= delta_at_eps(g, eps) + 1e-15


def test_monotonicity():
    g = make_gaussian(1.5)
    ds = [delta_at_eps(g, e) for e in np.linspace(0, 5, 51)]
    assert np.all(np.diff(ds) <= 0)
    es = [eps_at_delta(g, d) for d in np.logspace(-10, -0.5, 20)]
    assert np.all(np.diff(es) <= 0)
