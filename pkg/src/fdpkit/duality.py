"""Conversions between trade-off curves and (eps, delta) guarantees."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import stats

from .curve import (DiscreteDistribution, EpsDeltaCurve, GaussianCurve,
                    PiecewiseLinearCurve, TradeoffCurve, make_grid)
from .errors import AccountingError, DomainError

EPS_CAP = 64.0
EPS_TOL = 1e-12


@dataclass(frozen=True)
class EpsDeltaPoint:
    eps: float
    delta: float

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise DomainError(f"delta must lie in [0, 1], got {self.delta}")
        if not self.eps >= 0.0:
            raise DomainError(f"eps must be >= 0, got {self.eps}")


@dataclass(frozen=True)
class PrivacyProfile:
    points: tuple

    @property
    def eps(self) -> np.ndarray:
        return np.array([pt.eps for pt in self.points])

    @property
    def deltas(self) -> np.ndarray:
        return np.array([pt.delta for pt in self.points])


def gaussian_delta(mu: float, eps: float) -> float:
    """Exact delta(eps) of G_mu."""
    if mu == 0.0:
        return max(0.0, -math.expm1(eps))
    a = stats.norm.cdf(-eps / mu + mu / 2)
    b = stats.norm.cdf(-eps / mu - mu / 2)
    return float(min(1.0, max(0.0, a - math.exp(eps) * b)))


def _eps_delta_delta(curve: EpsDeltaCurve, eps: float) -> float:
    if eps >= curve.eps:
        return curve.delta
    e = math.exp(eps)
    one = 1.0 - curve.delta
    candidates = [curve.delta, 1.0 - e * one]
    if math.isfinite(curve.eps):
        candidates.append(1.0 - one * (1.0 + e) / (1.0 + math.exp(curve.eps)))
    return min(1.0, max(candidates))


def delta_at_eps(curve: TradeoffCurve, eps: float) -> float:
    """Smallest delta such that ``curve`` dominates f_{eps,delta}.

    Both supporting-line branches are maximized, so asymmetric curves are
    handled: sup(1 - e^eps a - f(a)) and sup(1 - a - e^eps f(a)).
    """
    eps = float(eps)
    if not math.isfinite(eps):
        raise DomainError("eps must be finite")
    if isinstance(curve, GaussianCurve):
        return gaussian_delta(curve.mu, eps)
    if isinstance(curve, EpsDeltaCurve):
        return _eps_delta_delta(curve, eps)
    pwl = curve.to_piecewise()
    e = math.exp(eps)
    first = np.max(1.0 - e * pwl.alphas - pwl.betas)
    second = np.max(1.0 - pwl.alphas - e * pwl.betas)
    return float(min(1.0, max(0.0, first, second)))


def bisect_eps(delta_fn: Callable[[float], float], delta: float,
               cap: float = EPS_CAP, tol: float = EPS_TOL) -> float:
    """Smallest eps in [0, cap] with delta_fn(eps) <= delta, else +inf.

    ``delta_fn`` must be non-increasing; the returned value errs upward.
    """
    if delta_fn(0.0) <= delta:
        return 0.0
    if delta_fn(cap) > delta:
        return math.inf
    lo, hi = 0.0, cap
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if delta_fn(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi


def eps_at_delta(curve: TradeoffCurve, delta: float) -> float:
    delta = float(delta)
    if not 0.0 < delta <= 1.0:
        raise DomainError(f"delta must lie in (0, 1], got {delta}")
    return bisect_eps(lambda e: delta_at_eps(curve, e), delta)


def privacy_profile(curve: TradeoffCurve, eps_grid: Sequence[float]) -> PrivacyProfile:
    grid = np.asarray(eps_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("eps grid must be strictly increasing")
    deltas = np.array([delta_at_eps(curve, e) for e in grid])
    if np.any(np.diff(deltas) > 1e-12):
        raise AccountingError("privacy profile is not monotone")
    deltas = np.minimum.accumulate(deltas)
    return PrivacyProfile(tuple(EpsDeltaPoint(float(max(e, 0.0)), float(d))
                                for e, d in zip(grid, deltas)))


def hockey_stick(P: DiscreteDistribution, Q: DiscreteDistribution, eps: float) -> float:
    """H_{e^eps}(P, Q) = sum over outcomes of max(P(x) - e^eps Q(x), 0)."""
    q = P.aligned(Q)
    e = math.exp(eps)
    return math.fsum(np.maximum(P.mass - e * q, 0.0))


def curve_from_profile(eps_grid, deltas, grid=None) -> PiecewiseLinearCurve:
    """Upper envelope of f_{eps_i, delta_i}: the curve a profile certifies."""
    xs = make_grid() if grid is None else np.asarray(grid, dtype=float)
    best = np.zeros_like(xs)
    for eps, delta in zip(eps_grid, deltas):
        delta = min(max(float(delta), 0.0), 1.0)
        e = math.exp(eps)
        one = 1.0 - delta
        best = np.maximum(best, np.maximum(one - e * xs, (one - xs) / e))
    best = np.minimum(best, 1.0 - xs)
    return PiecewiseLinearCurve(xs, best, symmetric=True, validate=False)
