import math

import numpy as np
import pytest

from fdpkit.census import AllocationTable, census_compose
from fdpkit.curve import DiscreteDistribution
from fdpkit.duality import eps_at_delta
from fdpkit.errors import DomainError
from fdpkit.mech import discrete_gaussian_curve, discrete_gaussian_support
from fdpkit.oracle import exact_tradeoff_discrete


def table(sigmas):
    return AllocationTable(tuple((f"L{i // 9}", f"Q{i % 9}", s) for i, s in enumerate(sigmas)))


def sum_statistic_pair(sigma, m):
    """Law of the sum of m i.i.d. discrete Gaussians under both hypotheses.

    For equal sigma the likelihood ratio of the product depends only on the
    sum, so the sum is sufficient and its law gives the exact curve.
    """
    x, p, q, _ = discrete_gaussian_support(sigma, 1)
    P, Q = p, q
    for _ in range(m - 1):
        P, Q = np.convolve(P, p), np.convolve(Q, q)
    keep = (P > 1e-300) | (Q > 1e-300)
    return DiscreteDistribution.from_masses(P[keep]), DiscreteDistribution.from_masses(Q[keep])


def test_single_row():
    res = census_compose(table([1.0]), 1e-6)
    target = eps_at_delta(discrete_gaussian_curve(1.0, 1), 1e-6)
    assert res.eps_lower == pytest.approx(target, abs=1e-12)
    assert res.eps_upper == pytest.approx(target, abs=1e-12)


@pytest.mark.parametrize("m", [2, 3, 4])
def test_equal_sigma_exact(m):
    sigma = 2.0
    res = census_compose(table([sigma] * m), 1e-6)
    P, Q = sum_statistic_pair(sigma, m)
    target = eps_at_delta(exact_tradeoff_discrete(P, Q), 1e-6)
    assert abs(res.eps_upper - target) < 1e-9
    assert abs(res.eps_lower - target) < 1e-9


def test_product_brute_force_small():
    sigma, m = 1.5, 2
    x, p, q, _ = discrete_gaussian_support(sigma, 1)
    keep = p > 1e-12
    p2, q2 = np.outer(p[keep], p[keep]).ravel(), np.outer(q[keep], q[keep]).ravel()
    curve = exact_tradeoff_discrete(DiscreteDistribution.from_masses(p2 / p2.sum()),
                                    DiscreteDistribution.from_masses(q2 / q2.sum()))
    res = census_compose(table([sigma] * m), 1e-3)
    assert res.eps_upper == pytest.approx(eps_at_delta(curve, 1e-3), abs=1e-6)


def test_remove_row_monotone():
    sigmas = [3.0, 4.0, 5.0, 3.5]
    full = census_compose(table(sigmas), 1e-8, cell=1e-3)
    less = census_compose(table(sigmas[:-1]), 1e-8, cell=1e-3)
    assert less.eps_upper <= full.eps_upper
    assert less.eps_lower <= full.eps_lower


def test_doubling_sigma():
    a = census_compose(table([4.0] * 10), 1e-8)
    b = census_compose(table([8.0] * 10), 1e-8)
    assert b.eps_upper < a.eps_upper


def test_unequal_sandwich():
    res = census_compose(table([3.0, 4.0, 5.0, 6.0] * 3), 1e-10, cell=1e-3)
    assert res.eps_lower <= res.eps_upper
    assert (res.eps_upper - res.eps_lower) / res.eps_upper < 0.01


def test_json_fields():
    out = census_compose(table([5.0] * 3), 1e-6).to_json()
    assert set(out) == {"eps_lower", "eps_upper", "delta", "m", "method", "cell"}
    assert out["method"] == "FFT" and out["m"] == 3


def test_csv(tmp_path):
    path = tmp_path / "alloc.csv"
    path.write_text("level,query,sigma\nnation,total,2.0\nstate,total,3.0\n")
    t = AllocationTable.from_csv(path)
    assert t.sigmas == [2.0, 3.0]


@pytest.mark.parametrize("rows", [
    (("a", "b", -1.0),),
    (("a", "b", 1.0), ("a", "b", 2.0)),
])
def test_table_validation(rows):
    with pytest.raises(DomainError):
        AllocationTable(rows)


def test_empty_table():
    with pytest.raises(DomainError):
        census_compose(AllocationTable(()), 1e-6)
