"""Independent reference computations used to check the production paths."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from .curve import (DiscreteDistribution, PiecewiseLinearCurve, make_eps_delta,
                    make_gaussian, renyi, total_variation)
from .errors import DomainError, ResourceError, SearchExhaustedError

MAX_ATOMS = 1_000_000


@dataclass(frozen=True, eq=False)
class EmpiricalCurve:
    alphas: np.ndarray
    betas: np.ndarray
    half_widths: np.ndarray
    n: int
    warning: Optional[str] = None

    def contains(self, curve) -> np.ndarray:
        """Whether the band covers ``curve`` at each grid alpha."""
        return np.abs(curve(self.alphas) - self.betas) <= self.half_widths


def exact_tradeoff_discrete(P: DiscreteDistribution, Q: DiscreteDistribution) -> PiecewiseLinearCurve:
    """Neyman-Pearson curve by exact rational arithmetic.

    Outcomes are ordered by comparing p_i q_j with p_j q_i (no logarithms),
    grouped at equal ratios, and accumulated as fractions, so every knot is
    the correctly rounded value of the exact one.
    """
    if len(P.support) > MAX_ATOMS:
        raise ResourceError(f"support of {len(P.support)} atoms exceeds {MAX_ATOMS}")
    q_mass = P.aligned(Q)
    atoms = [(Fraction(float(p)), Fraction(float(q)))
             for p, q in zip(P.mass, q_mass) if p > 0 or q > 0]

    def by_ratio(a, b):
        # ascending p/q; q = 0 counts as +inf
        left, right = a[0] * b[1], b[0] * a[1]
        return (left > right) - (left < right)

    atoms.sort(key=functools.cmp_to_key(by_ratio))
    # float masses sum to 1 only up to rounding; normalize exactly
    p_total = sum((p for p, _ in atoms), Fraction(0))
    q_total = sum((q for _, q in atoms), Fraction(0))
    alpha, q_left = Fraction(0), q_total
    alphas, betas = [0.0], [float(q_left / q_total)]
    i = 0
    while i < len(atoms):
        j = i
        while j < len(atoms) and by_ratio(atoms[i], atoms[j]) == 0:
            alpha += atoms[j][0]
            q_left -= atoms[j][1]
            j += 1
        alphas.append(float(alpha / p_total))
        betas.append(float(q_left / q_total))
        i = j
    return PiecewiseLinearCurve(np.array(alphas), np.array(betas), validate=False)


def mc_tradeoff(sampler_p: Callable, sampler_q: Callable, loss_fn: Callable, n: int,
                alphas: Sequence[float], seed: int = 0) -> EmpiricalCurve:
    """Empirical trade-off of the likelihood-ratio test with 3-sigma bands.

    Samplers are called as ``sampler(rng, n)``. The test rejects P when the
    loss falls below the empirical alpha-quantile under P, randomizing on ties.
    The band combines the binomial error of beta under Q with the error of the
    threshold, propagated through the slope -exp(-t) of the curve.
    """
    n = int(n)
    if n < 1000:
        raise DomainError("mc_tradeoff needs n >= 1000")
    alphas = np.asarray(alphas, dtype=float)
    seeds = np.random.SeedSequence(seed).spawn(2)
    lp = np.sort(np.asarray(loss_fn(sampler_p(np.random.default_rng(seeds[0]), n)), float))
    lq = np.sort(np.asarray(loss_fn(sampler_q(np.random.default_rng(seeds[1]), n)), float))
    if lp[0] == lp[-1] and lq[0] == lq[-1] and lp[0] == lq[0]:
        hw = 3.0 * np.sqrt(alphas * (1 - alphas) / n)
        return EmpiricalCurve(alphas, 1.0 - alphas, hw, n, "degenerate losses; identity estimate")
    k = np.clip(np.floor(alphas * n).astype(int), 0, n - 1)
    t = lp[k]
    below_p = np.searchsorted(lp, t, side="left") / n
    tie_p = np.searchsorted(lp, t, side="right") / n - below_p
    above_q = 1.0 - np.searchsorted(lq, t, side="right") / n
    tie_q = 1.0 - np.searchsorted(lq, t, side="left") / n - above_q
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(tie_p > 0, (alphas - below_p) / tie_p, 0.0)
    c = np.clip(c, 0.0, 1.0)
    betas = np.clip(above_q + (1.0 - c) * tie_q, 0.0, 1.0)
    betas = np.where(alphas >= 1.0, 0.0, betas)
    with np.errstate(over="ignore"):
        slope = np.exp(-2.0 * np.clip(t, -350.0, 350.0))
    var = betas * (1 - betas) / n + slope * alphas * (1 - alphas) / n
    return EmpiricalCurve(alphas, betas, 3.0 * np.sqrt(var), n)


@dataclass(frozen=True)
class RenyiWitness:
    eps: float
    renyi_margins: dict = field(default_factory=dict)
    tv_margin: float = 0.0


def renyi_counterexample_search(eps_grid: Sequence[float], gamma_grid: Sequence[float]
                                ) -> RenyiWitness:
    """First eps at which the Renyi order and the trade-off order disagree.

    Compares the Gaussian shift pair N(0, 1), N(eps, 1) with the Bernoulli pair
    whose likelihood ratios are e^{+-eps}: the Gaussian must be at least as
    Renyi-divergent for every gamma, yet strictly closer in total variation.
    Margins are renyi(gaussian) - renyi(bernoulli) and tv(bernoulli) - tv(gaussian).
    """
    eps_grid = list(eps_grid)
    if not eps_grid:
        raise DomainError("eps grid must be non-empty")
    for eps in eps_grid:
        g, b = make_gaussian(eps), make_eps_delta(eps, 0.0)
        margins = {float(gm): renyi(g, gm) - renyi(b, gm) for gm in gamma_grid}
        tv_margin = total_variation(b) - total_variation(g)
        if all(v >= 0 for v in margins.values()) and tv_margin > 0:
            return RenyiWitness(float(eps), margins, tv_margin)
    raise SearchExhaustedError("no witness on the given grids; widen them")
