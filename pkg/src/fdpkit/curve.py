"""Trade-off curves: construction, evaluation and algebra.

A trade-off curve ``f`` maps a type I error ``alpha`` to the smallest type II
error achievable when testing ``P`` against ``Q``. Every curve here also
exposes the law of the privacy loss ``L = log dP/dQ`` under ``P``, which is
what the lattice accountant in :mod:`fdpkit.pld` consumes:

* ``loss_cdf(t)`` is the alpha at which the slope of ``f`` crosses
  ``-exp(-t)``;
* ``p_infinite`` is the P-mass at ``L = +inf`` (flat run of ``f`` at zero);
* ``q_singular`` is the Q-mass where ``P`` vanishes (``1 - f(0)``).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import spatial, special, stats

from . import _quad
from .errors import DomainError

DEFAULT_GRID_SIZE = 10_000
SMALLEST_CELL = 1e-12
COMPARE_TOL = 1e-12


def make_grid(n: int = DEFAULT_GRID_SIZE, smallest: float = SMALLEST_CELL) -> np.ndarray:
    """Alpha grid: uniform in the bulk, geometric toward both endpoints."""
    if n < 2:
        raise DomainError(f"grid size must be >= 2, got {n}")
    n_uniform = max(n // 2, 2)
    n_tail = max((n - n_uniform) // 2, 1)
    tail = np.geomspace(smallest, 1e-2, n_tail)
    return np.unique(np.concatenate([np.linspace(0.0, 1.0, n_uniform), tail, 1.0 - tail]))


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Probability mass function on a finite set of labelled outcomes."""

    support: tuple
    mass: np.ndarray

    def __post_init__(self):
        support = tuple(self.support)
        mass = np.asarray(self.mass, dtype=float).reshape(-1)
        if len(support) != mass.size:
            raise DomainError("support and mass lengths differ")
        if len(set(support)) != len(support):
            raise DomainError("support labels must be distinct")
        if np.any(mass < 0) or not np.all(np.isfinite(mass)):
            raise DomainError("masses must be finite and nonnegative")
        if abs(math.fsum(mass) - 1.0) > 1e-12:
            raise DomainError(f"masses sum to {math.fsum(mass)!r}, not 1")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "mass", mass)

    @classmethod
    def from_masses(cls, mass) -> "DiscreteDistribution":
        mass = np.asarray(mass, dtype=float)
        return cls(tuple(range(mass.size)), mass)

    def aligned(self, other: "DiscreteDistribution") -> np.ndarray:
        """Masses of ``other`` reordered to this distribution's support."""
        if set(self.support) != set(other.support):
            raise DomainError("distributions are on different supports")
        index = {label: i for i, label in enumerate(other.support)}
        return other.mass[[index[label] for label in self.support]]

    def push_forward(self, kernel) -> "DiscreteDistribution":
        """Applies a row-stochastic matrix (outcome -> new outcome)."""
        kernel = np.asarray(kernel, dtype=float)
        return DiscreteDistribution.from_masses(self.mass @ kernel)


class DominanceOrder(enum.Enum):
    DOMINATES = "Dominates"
    DOMINATED_BY = "DominatedBy"
    EQUAL = "Equal"
    INCOMPARABLE = "Incomparable"


class SymmetrizeMode(enum.Enum):
    MAX = "Max"
    MIN_BICONJUGATE = "MinBiconjugate"


def _as_alpha(alpha):
    a = np.asarray(alpha, dtype=float)
    if np.any(~(a >= 0.0)) or np.any(~(a <= 1.0)):
        raise DomainError("alpha must lie in [0, 1]")
    return a


class TradeoffCurve:
    """Base class; concrete kinds override ``_eval`` and the loss-law hooks."""

    kind = "abstract"
    symmetric = False

    def __call__(self, alpha):
        a = _as_alpha(alpha)
        out = np.clip(self._eval(np.atleast_1d(a)), 0.0, 1.0)
        return float(out[0]) if a.ndim == 0 else out.reshape(a.shape)

    def _eval(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def q_singular(self) -> float:
        return 1.0 - float(self._eval(np.zeros(1))[0])

    @property
    def p_infinite(self) -> float:
        return 0.0

    def loss_cdf(self, t, strict: bool = False):
        """P(L <= t), or P(L < t) when ``strict``."""
        raise NotImplementedError

    def loss_sf(self, t, strict: bool = False):
        """P(L > t), or P(L >= t) when ``strict``."""
        return 1.0 - self.loss_cdf(t, strict=strict)

    def loss_expectation(self, g: Callable) -> float:
        """E_P[g(L)], including the atom at L = +inf."""
        raise NotImplementedError

    def max_loss(self) -> float:
        raise NotImplementedError

    def to_piecewise(self, grid=None) -> "PiecewiseLinearCurve":
        """Knots placed on the curve; chords lie above it (privacy-optimistic)."""
        grid = make_grid() if grid is None else np.asarray(grid, dtype=float)
        return PiecewiseLinearCurve(grid, self(grid), validate=False,
                                    symmetric=self.symmetric)

    def __repr__(self):
        return f"{type(self).__name__}(kind={self.kind!r})"


class PiecewiseLinearCurve(TradeoffCurve):
    """Convex polyline through ``(alphas[i], betas[i])``.

    Segment data (P-mass and Q-mass of each linear piece) is kept alongside the
    knots so the loss law is exact even when knot differences underflow.
    """

    kind = "piecewise_linear"

    def __init__(self, alphas, betas, *, symmetric=False, validate=True,
                 _segments=None):
        alphas = np.asarray(alphas, dtype=float)
        betas = np.asarray(betas, dtype=float)
        if alphas.ndim != 1 or alphas.shape != betas.shape or alphas.size < 2:
            raise DomainError("knots must be two equal-length 1-D sequences")
        if validate:
            _validate_knots(alphas, betas)
        # duplicated alphas: the last knot of a run carries the lowest beta
        last_of_run = np.concatenate([alphas[1:] != alphas[:-1], [True]])
        self.alphas = alphas[last_of_run]
        self.betas = betas[last_of_run]
        if self.alphas[0] != 0.0:
            raise DomainError("first knot must sit at alpha = 0")
        self.symmetric = bool(symmetric)
        if _segments is None:
            p = np.diff(self.alphas)
            q = np.maximum(-np.diff(self.betas), 0.0)
            _segments = (p, q, max(1.0 - self.betas[0], 0.0))
        self._set_segments(*_segments)

    def _set_segments(self, p, q, q_sing):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        live = p > 0
        p, q = p[live], q[live]
        with np.errstate(divide="ignore"):
            loss = np.log(p) - np.log(q)
        order = np.argsort(loss, kind="stable")
        self._p = p[order]
        self._q = q[order]
        self._loss = loss[order]
        self._q_sing = float(q_sing)
        self._cum_p = np.concatenate([[0.0], np.cumsum(self._p)])
        self._rev_p = np.concatenate([np.cumsum(self._p[::-1])[::-1], [0.0]])

    @classmethod
    def from_masses(cls, p, q, *, symmetric=False) -> "PiecewiseLinearCurve":
        """Neyman-Pearson curve of a pair given per-outcome masses.

        Outcomes are ordered by likelihood ratio; outcomes with zero P-mass form
        the vertical drop at alpha = 0 and outcomes with zero Q-mass the flat
        run at beta = 0.
        """
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if p.shape != q.shape:
            raise DomainError("mass arrays differ in shape")
        q_sing = math.fsum(q[p == 0])
        live = p > 0
        p, q = p[live], q[live]
        with np.errstate(divide="ignore"):
            loss = np.log(p) - np.log(q)
        order = np.argsort(loss, kind="stable")
        p, q = p[order], q[order]
        ld = np.longdouble
        alphas = np.concatenate([[ld(0)], np.cumsum(p.astype(ld))])
        betas = np.concatenate([np.cumsum(q[::-1].astype(ld))[::-1], [ld(0)]])
        alphas = alphas.astype(float)
        alphas /= alphas[-1]
        betas = np.minimum(betas.astype(float), 1.0)
        return cls(alphas, betas, symmetric=symmetric, validate=False,
                   _segments=(p, q, q_sing))

    def _eval(self, a):
        return np.interp(a, self.alphas, self.betas)

    @property
    def q_singular(self) -> float:
        return self._q_sing

    @property
    def p_infinite(self) -> float:
        return float(np.sum(self._p[self._q == 0]))

    def segments(self):
        """(p_mass, q_mass, loss) per linear piece, losses ascending."""
        return self._p.copy(), self._q.copy(), self._loss.copy()

    def loss_cdf(self, t, strict=False):
        idx = np.searchsorted(self._loss, t, side="left" if strict else "right")
        return self._cum_p[idx]

    def loss_sf(self, t, strict=False):
        idx = np.searchsorted(self._loss, t, side="left" if strict else "right")
        return self._rev_p[idx]

    def loss_expectation(self, g):
        with np.errstate(over="ignore", invalid="ignore"):
            vals = np.asarray(g(self._loss), dtype=float)
        return float(np.dot(self._p, vals))

    def log_mgf(self, s: float) -> float:
        """log E_P[exp(s L)] computed in log space."""
        if s > 0 and self.p_infinite > 0:
            return math.inf
        finite = np.isfinite(self._loss)
        return float(special.logsumexp(s * self._loss[finite], b=self._p[finite]))

    def max_loss(self):
        return float(self._loss[-1])

    def to_piecewise(self, grid=None):
        return self


def _validate_knots(alphas, betas, tol=1e-10):
    if alphas[0] != 0.0 or alphas[-1] != 1.0:
        raise DomainError("knots must span alpha in [0, 1]")
    if np.any(np.diff(alphas) < 0):
        raise DomainError("alpha knots must be increasing")
    if np.any(betas < -tol) or np.any(betas > 1 + tol):
        raise DomainError("beta knots must lie in [0, 1]")
    if np.any(np.diff(betas) > tol):
        raise DomainError("curve must be non-increasing")
    if np.any(betas > 1.0 - alphas + tol):
        raise DomainError("curve must lie below the identity 1 - alpha")
    if betas[-1] > tol:
        raise DomainError("curve must reach 0 at alpha = 1")
    dx, dy = np.diff(alphas), np.diff(betas)
    cross = dy[1:] * dx[:-1] - dy[:-1] * dx[1:]
    if np.any(cross < -tol):
        raise DomainError("knots do not describe a convex curve")


class GaussianCurve(TradeoffCurve):
    """G_mu(alpha) = Phi(Phi^{-1}(1 - alpha) - mu)."""

    kind = "gaussian"
    symmetric = True

    def __init__(self, mu: float):
        self.mu = float(mu)

    def _eval(self, a):
        return stats.norm.cdf(stats.norm.isf(a) - self.mu)

    @property
    def q_singular(self):
        return 0.0

    def loss_cdf(self, t, strict=False):
        t = np.asarray(t, dtype=float)
        mu = self.mu
        if mu == 0.0:
            return np.where(t > 0 if strict else t >= 0, 1.0, 0.0)
        return stats.norm.cdf((t - 0.5 * mu * mu) / mu)

    def loss_sf(self, t, strict=False):
        t = np.asarray(t, dtype=float)
        mu = self.mu
        if mu == 0.0:
            return np.where(t <= 0 if strict else t < 0, 1.0, 0.0)
        return stats.norm.sf((t - 0.5 * mu * mu) / mu)

    def loss_expectation(self, g):
        value, _ = _quad.adaptive_normal_expectation(
            g, loc=0.5 * self.mu ** 2, scale=self.mu, tol=1e-13)
        return float(value)

    def log_mgf(self, s):
        return s * self.mu ** 2 / 2 + s * s * self.mu ** 2 / 2

    def max_loss(self):
        return math.inf if self.mu > 0 else 0.0

    def __repr__(self):
        return f"GaussianCurve(mu={self.mu!r})"


class EpsDeltaCurve(TradeoffCurve):
    """f_{eps,delta}(alpha) = max(0, 1 - delta - e^eps alpha, e^-eps (1 - delta - alpha))."""

    kind = "eps_delta"
    symmetric = True

    def __init__(self, eps: float, delta: float):
        self.eps = float(eps)
        self.delta = float(delta)
        if math.isinf(self.eps) or self.delta == 1.0:
            self._pwl = PiecewiseLinearCurve.from_masses([1.0, 0.0], [0.0, 1.0],
                                                         symmetric=True)
        else:
            e = math.exp(self.eps)
            mass = 1.0 - self.delta
            corner = mass / (1.0 + e)
            self._pwl = PiecewiseLinearCurve.from_masses(
                [0.0, corner, mass - corner, self.delta],
                [self.delta, e * corner, (mass - corner) / e, 0.0],
                symmetric=True)

    def _eval(self, a):
        if math.isinf(self.eps):
            return self._pwl._eval(a)
        e = math.exp(self.eps)
        one = 1.0 - self.delta
        return np.maximum(0.0, np.maximum(one - e * a, (one - a) / e))

    @property
    def q_singular(self):
        return self._pwl.q_singular

    @property
    def p_infinite(self):
        return self._pwl.p_infinite

    def loss_cdf(self, t, strict=False):
        return self._pwl.loss_cdf(t, strict)

    def loss_sf(self, t, strict=False):
        return self._pwl.loss_sf(t, strict)

    def loss_expectation(self, g):
        return self._pwl.loss_expectation(g)

    def log_mgf(self, s):
        return self._pwl.log_mgf(s)

    def max_loss(self):
        return self.eps if self.delta == 0.0 else math.inf

    def to_piecewise(self, grid=None):
        return self._pwl

    def __repr__(self):
        return f"EpsDeltaCurve(eps={self.eps!r}, delta={self.delta!r})"


class SubsampledCurve(TradeoffCurve):
    """alpha -> p * base(alpha) + (1 - p) * (1 - alpha).

    This is T(P, (1 - p) P + p Q) when base = T(P, Q): one step of a mechanism
    that touches a given record with probability p.
    """

    kind = "subsampled"

    def __init__(self, base: TradeoffCurve, p: float):
        if not 0.0 < p < 1.0:
            raise DomainError("SubsampledCurve needs 0 < p < 1; use the mech helper")
        self.base = base
        self.p = float(p)

    def _eval(self, a):
        return self.p * self.base._eval(a) + (1.0 - self.p) * (1.0 - a)

    @property
    def q_singular(self):
        return self.p * self.base.q_singular

    def _base_threshold(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            gap = np.exp(-t) - (1.0 - self.p)
            tb = -np.log(gap / self.p)
        return t, gap, np.where(gap > 0, tb, np.inf)

    def loss_cdf(self, t, strict=False):
        t, gap, tb = self._base_threshold(t)
        inner = self.base.loss_cdf(tb, strict=strict)
        if strict:
            edge = 1.0 - self.base.p_infinite
            return np.where(gap < 0, 1.0, np.where(gap == 0, edge, inner))
        return np.where(gap <= 0, 1.0, inner)

    def loss_sf(self, t, strict=False):
        t, gap, tb = self._base_threshold(t)
        inner = self.base.loss_sf(tb, strict=strict)
        if strict:
            return np.where(gap < 0, 0.0, np.where(gap == 0, self.base.p_infinite, inner))
        return np.where(gap <= 0, 0.0, inner)

    def _map(self, loss):
        with np.errstate(over="ignore"):
            return -np.log(self.p * np.exp(-loss) + (1.0 - self.p))

    def loss_expectation(self, g):
        return self.base.loss_expectation(lambda loss: g(self._map(loss)))

    def max_loss(self):
        return float(self._map(np.float64(self.base.max_loss())))

    def min_loss(self):
        return float(self._map(np.float64(self.base.min_loss())))

    def __repr__(self):
        return f"SubsampledCurve(base={self.base!r}, p={self.p!r})"


class InverseCurve(TradeoffCurve):
    """f^{-1} = T(Q, P) for an asymmetric analytic f = T(P, Q)."""

    kind = "inverse"

    def __init__(self, base: TradeoffCurve):
        self.base = base

    def _eval(self, b):
        lo = np.zeros_like(b)
        hi = np.ones_like(b)
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            below = self.base._eval(mid) <= b
            hi = np.where(below, mid, hi)
            lo = np.where(below, lo, mid)
        return np.where(self.base._eval(np.zeros_like(b)) <= b, 0.0, hi)

    @property
    def q_singular(self):
        return self.base.p_infinite

    @property
    def p_infinite(self):
        return self.base.q_singular

    def loss_cdf(self, t, strict=False):
        # P'(L' <= t) = Q(L >= -t) = f(P(L < -t))
        t = np.asarray(t, dtype=float)
        return self.base(np.clip(self.base.loss_cdf(-t, strict=not strict), 0.0, 1.0))

    def loss_expectation(self, g):
        def tilted(loss):
            with np.errstate(over="ignore", invalid="ignore"):
                vals = np.exp(-loss) * g(-loss)
            return np.where(np.isposinf(loss), 0.0, vals)

        total = self.base.loss_expectation(tilted)
        if self.base.q_singular > 0:
            total += self.base.q_singular * float(g(np.float64(np.inf)))
        return total

    def max_loss(self):
        if self.base.q_singular > 0:
            return math.inf
        return -self.base.min_loss()

    def min_loss(self):
        if self.base.p_infinite > 0:
            return -math.inf
        return -self.base.max_loss()

    def __repr__(self):
        return f"InverseCurve({self.base!r})"


def _pwl_min_loss(self):
    return float(self._loss[0])


PiecewiseLinearCurve.min_loss = _pwl_min_loss
GaussianCurve.min_loss = lambda self: -math.inf if self.mu > 0 else 0.0
EpsDeltaCurve.min_loss = lambda self: self._pwl.min_loss()


@dataclass(frozen=True, eq=False)
class ConvexPiecewiseLinear:
    """Convex piecewise-linear function on the reals.

    Beyond the outer knots the function continues with ``slope_left`` and
    ``slope_right``; an infinite slope there means the domain ends at that knot.
    """

    knots: np.ndarray
    values: np.ndarray
    slope_left: float = -math.inf
    slope_right: float = math.inf

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xs, vs = self.knots, self.values
        out = np.interp(x, xs, vs)
        with np.errstate(invalid="ignore", over="ignore"):
            left = vs[0] + self.slope_left * (x - xs[0])
            right = vs[-1] + self.slope_right * (x - xs[-1])
        out = np.where(x < xs[0], np.where(np.isinf(self.slope_left), np.inf, left), out)
        out = np.where(x > xs[-1], np.where(np.isinf(self.slope_right), np.inf, right), out)
        return float(out) if out.ndim == 0 else out

    @property
    def breakpoints(self) -> np.ndarray:
        """Slopes of the inner pieces; these are the knots of the conjugate."""
        return np.diff(self.values) / np.diff(self.knots)

    def conjugate(self) -> "ConvexPiecewiseLinear":
        """Exact Legendre transform: knots and slopes trade places."""
        xs, vs = self.knots, self.values
        slopes = np.concatenate([[self.slope_left], self.breakpoints, [self.slope_right]])
        ys, vals = [], []
        for j, s in enumerate(slopes):
            if math.isinf(s):
                continue
            k = min(j, xs.size - 1)
            ys.append(s)
            vals.append(s * xs[k] - vs[k])
        if not ys:
            return ConvexPiecewiseLinear(np.zeros(1), np.array([-vs[0]]), xs[0], xs[0])
        new_left = -math.inf if np.isfinite(self.slope_left) else xs[0]
        new_right = math.inf if np.isfinite(self.slope_right) else xs[-1]
        return ConvexPiecewiseLinear(np.array(ys), np.array(vals), new_left, new_right)


def _lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by x."""
    if len(x) > 2048:
        try:
            return _lower_hull_qhull(x, y)
        except spatial.QhullError:
            pass
    hull = []
    for i in range(len(x)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.array(hull)


def _lower_hull_qhull(x, y):
    pts = np.column_stack([x, y])
    vertices = spatial.ConvexHull(pts).vertices  # counter-clockwise
    start = np.flatnonzero(vertices == 0)[0]
    stop = np.flatnonzero(vertices == len(x) - 1)[0]
    walk = np.roll(vertices, -start)
    return np.sort(walk[:(stop - start) % len(vertices) + 1])


def convex_minorant(alphas, betas, *, symmetric=False) -> PiecewiseLinearCurve:
    """Greatest convex minorant of the polyline through the given points."""
    alphas = np.asarray(alphas, dtype=float)
    betas = np.asarray(betas, dtype=float)
    idx = _lower_hull(alphas, betas)
    return PiecewiseLinearCurve(alphas[idx], betas[idx], symmetric=symmetric,
                                validate=False)


# ---------------------------------------------------------------------------
# public operations

def make_gaussian(mu: float) -> GaussianCurve:
    mu = float(mu)
    if not math.isfinite(mu) or mu < 0:
        raise DomainError(f"mu must be finite and >= 0, got {mu}")
    return GaussianCurve(mu)


def make_eps_delta(eps: float, delta: float) -> EpsDeltaCurve:
    eps, delta = float(eps), float(delta)
    if math.isnan(eps) or eps < 0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    if not 0.0 <= delta <= 1.0:
        raise DomainError(f"delta must lie in [0, 1], got {delta}")
    return EpsDeltaCurve(eps, delta)


def identity() -> PiecewiseLinearCurve:
    """Id(alpha) = 1 - alpha, perfect privacy."""
    return PiecewiseLinearCurve.from_masses([1.0], [1.0], symmetric=True)


def zero_curve() -> PiecewiseLinearCurve:
    """f = 0, perfect distinguishability."""
    return PiecewiseLinearCurve.from_masses([1.0, 0.0], [0.0, 1.0], symmetric=True)


def evaluate(curve: TradeoffCurve, alpha):
    return curve(alpha)


def invert(curve: TradeoffCurve) -> TradeoffCurve:
    if curve.symmetric:
        return curve
    if isinstance(curve, PiecewiseLinearCurve):
        p, q, _ = curve.segments()
        return PiecewiseLinearCurve.from_masses(
            np.concatenate([q, [curve.q_singular]]), np.concatenate([p, [0.0]]))
    if isinstance(curve, InverseCurve):
        return curve.base
    return InverseCurve(curve)


def _merged_knots(f, g):
    xs = np.union1d(f.to_piecewise().alphas, g.to_piecewise().alphas)
    d = f(xs) - g(xs)
    cross = np.nonzero(d[:-1] * d[1:] < 0)[0]
    if cross.size:
        t = d[cross] / (d[cross] - d[cross + 1])
        xs = np.union1d(xs, xs[cross] + t * (xs[cross + 1] - xs[cross]))
    return xs


def symmetrize(curve: TradeoffCurve, mode=SymmetrizeMode.MAX) -> TradeoffCurve:
    """max{f, f^-1} or the convex biconjugate of min{f, f^-1}."""
    mode = SymmetrizeMode(mode)
    if curve.symmetric:
        return curve
    f = curve.to_piecewise()
    inv = invert(f)
    xs = _merged_knots(f, inv)
    if mode is SymmetrizeMode.MAX:
        return PiecewiseLinearCurve(xs, np.maximum(f(xs), inv(xs)), symmetric=True,
                                    validate=False)
    return convex_minorant(xs, np.minimum(f(xs), inv(xs)), symmetric=True)


def conjugate(curve: TradeoffCurve) -> ConvexPiecewiseLinear:
    """f*(x) = sup_{y in [0, 1]} (x y - f(y))."""
    pwl = curve.to_piecewise()
    return ConvexPiecewiseLinear(pwl.alphas, pwl.betas).conjugate()


def from_distribution_pair(P: DiscreteDistribution, Q: DiscreteDistribution,
                           symmetric=False) -> PiecewiseLinearCurve:
    """Exact Neyman-Pearson curve T(P, Q) of two finite distributions."""
    p = P.mass
    q = P.aligned(Q)
    live = (p > 0) | (q > 0)
    p, q = p[live], q[live]
    with np.errstate(divide="ignore"):
        loss = np.log(p) - np.log(q)
    # outcomes with equal likelihood ratio form a single atom
    levels, inverse = np.unique(loss, return_inverse=True)
    p_atoms = np.bincount(inverse, weights=p, minlength=levels.size)
    q_atoms = np.bincount(inverse, weights=q, minlength=levels.size)
    return PiecewiseLinearCurve.from_masses(p_atoms, q_atoms, symmetric=symmetric)


def to_distribution_pair(curve: TradeoffCurve):
    """A finite pair (P, Q) whose trade-off curve is the piecewise form of ``curve``."""
    pwl = curve.to_piecewise()
    p, q, _ = pwl.segments()
    p = np.concatenate([p, [0.0]])
    q = np.concatenate([q, [pwl.q_singular]])
    p, q = p / math.fsum(p), q / math.fsum(q)
    return DiscreteDistribution.from_masses(p), DiscreteDistribution.from_masses(q)


def max_divergence(curve: TradeoffCurve) -> float:
    """-log(-f'(1-)), the pure-DP epsilon; +inf when the left slope at 1 is 0."""
    return max(0.0, float(curve.max_loss()))


def total_variation(curve: TradeoffCurve) -> float:
    if isinstance(curve, GaussianCurve):
        return float(2.0 * stats.norm.cdf(curve.mu / 2.0) - 1.0)
    pwl = curve.to_piecewise()
    p, q, _ = pwl.segments()
    return 0.5 * (pwl.q_singular + math.fsum(np.abs(p - q)))


def renyi(curve: TradeoffCurve, gamma: float) -> float:
    """(gamma - 1)^-1 log of the integral of |f'|^(1 - gamma) over [0, 1]."""
    gamma = float(gamma)
    if not gamma > 1.0:
        raise DomainError(f"gamma must exceed 1, got {gamma}")
    s = gamma - 1.0
    if curve.p_infinite > 0:
        return math.inf
    if hasattr(curve, "log_mgf"):
        value = curve.log_mgf(s)
    else:
        value = math.log(curve.loss_expectation(lambda loss: np.exp(s * loss)))
    return max(0.0, value / s)


def compare(f: TradeoffCurve, g: TradeoffCurve, grid: int = DEFAULT_GRID_SIZE,
            tol: float = COMPARE_TOL) -> DominanceOrder:
    xs = make_grid(grid)
    d = f(xs) - g(xs)
    above, below = bool(np.any(d > tol)), bool(np.any(d < -tol))
    if above and below:
        return DominanceOrder.INCOMPARABLE
    if above:
        return DominanceOrder.DOMINATES
    if below:
        return DominanceOrder.DOMINATED_BY
    return DominanceOrder.EQUAL


def sup_distance(f: TradeoffCurve, g: TradeoffCurve, grid: int = DEFAULT_GRID_SIZE) -> float:
    xs = make_grid(grid)
    return float(np.max(np.abs(f(xs) - g(xs))))
