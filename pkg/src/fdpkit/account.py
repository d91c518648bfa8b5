"""Composition accountants.

Certified bounds come from lattice PLDs with directed rounding. The CLT,
Edgeworth and GDP-limit accountants are approximations and are labelled as
such in their diagnostics.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from . import _quad
from .curve import (PiecewiseLinearCurve, SymmetrizeMode, TradeoffCurve,
                    _merged_knots, convex_minorant, identity, invert, make_gaussian,
                    symmetrize)
from .duality import (PrivacyProfile, EpsDeltaPoint, bisect_eps, curve_from_profile,
                      eps_at_delta)
from .errors import AccountingError, DomainError
from .mech import subsampled_curve
from .pld import (DEFAULT_CELL, DEFAULT_SPAN, PrivacyLossDistribution, Rounding,
                  convolve, curve_to_pld, pld_to_curve, self_convolve)

DPSGD_CELL = 1e-5
DPSGD_SPAN = 20.0
CUMULANT_TOL = 1e-10


class ComposeMethod(enum.Enum):
    CLOSED_FORM = "ClosedForm"
    FFT = "FFT"
    CLT = "CLT"
    EDGEWORTH = "Edgeworth"


class DpsgdMethod(enum.Enum):
    GDP_LIMIT = "GDPLimit"
    EDGEWORTH = "Edgeworth"
    FFT = "FFT"


@dataclass(frozen=True)
class CltFunctionals:
    kl: float
    kappa2: float

    def __post_init__(self):
        if self.kl < -1e-12 or self.kappa2 < 0:
            raise AccountingError(f"invalid functionals kl={self.kl}, kappa2={self.kappa2}")


def _pointwise_max(f: TradeoffCurve, g: TradeoffCurve, symmetric=False) -> PiecewiseLinearCurve:
    xs = _merged_knots(f, g)
    return PiecewiseLinearCurve(xs, np.maximum(f(xs), g(xs)), symmetric=symmetric,
                                validate=False)


def _min_minorant(f: TradeoffCurve, g: TradeoffCurve, symmetric=False) -> PiecewiseLinearCurve:
    xs = _merged_knots(f, g)
    return convex_minorant(xs, np.minimum(f(xs), g(xs)), symmetric=symmetric)


class ComposeReport:
    """Bounds on a composed trade-off curve.

    ``lower`` lies below the true curve and ``upper`` above it. For the FFT
    method both are built on first access from the stored PLDs: ``forward``
    holds the PLD pairs (pessimistic, optimistic) of the composition and
    ``inverse`` those of the composition of inverse curves, or None when every
    input is symmetric.
    """

    def __init__(self, method: ComposeMethod, *, lower=None, upper=None,
                 forward=None, inverse=None, diagnostics=None):
        self.method = ComposeMethod(method)
        self._lower = lower
        self._upper = upper
        self.forward = forward
        self.inverse = inverse
        self.diagnostics = dict(diagnostics or {})

    @property
    def certified(self) -> bool:
        return self.method in (ComposeMethod.FFT, ComposeMethod.CLOSED_FORM)

    @functools.cached_property
    def lower(self) -> TradeoffCurve:
        if self._lower is not None:
            return self._lower
        g = pld_to_curve(self.forward[0])
        if self.inverse is None:
            return symmetrize(g, SymmetrizeMode.MAX)
        return _pointwise_max(g, invert(pld_to_curve(self.inverse[0])))

    @functools.cached_property
    def upper(self) -> TradeoffCurve:
        if self._upper is not None:
            return self._upper
        h = pld_to_curve(self.forward[1])
        if self.inverse is None:
            return symmetrize(h, SymmetrizeMode.MIN_BICONJUGATE)
        return _min_minorant(h, invert(pld_to_curve(self.inverse[1])))

    def _plds(self, index):
        plds = [self.forward[index]]
        if self.inverse is not None:
            plds.append(self.inverse[index])
        return plds

    def delta_bounds(self, eps: float):
        """(delta_lower, delta_upper) at ``eps``."""
        if self.forward is None:
            from .duality import delta_at_eps
            return delta_at_eps(self.upper, eps), delta_at_eps(self.lower, eps)
        lo = max(p.hockey_stick(eps) for p in self._plds(1))
        hi = max(p.hockey_stick(eps) for p in self._plds(0))
        return lo, hi

    def eps_bounds(self, delta: float):
        """(eps_lower, eps_upper) at ``delta``; eps_upper is the certified guarantee."""
        if not 0.0 < delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {delta}")
        if self.forward is None:
            return eps_at_delta(self.upper, delta), eps_at_delta(self.lower, delta)
        lo = bisect_eps(lambda e: max(p.hockey_stick(e) for p in self._plds(1)), delta)
        hi = bisect_eps(lambda e: max(p.hockey_stick(e) for p in self._plds(0)), delta)
        return lo, hi


def compose_gaussian(mus: Sequence[float]) -> float:
    """G_mu1 x ... x G_mum = G_mu with mu = sqrt(sum mu_i^2)."""
    mus = np.asarray(list(mus), dtype=float)
    if np.any(~np.isfinite(mus)) or np.any(mus < 0):
        raise DomainError("mus must be finite and nonnegative")
    return math.sqrt(math.fsum(mus * mus))


def _compose_plds(curves, cell, rounding, span):
    # identical curve objects are composed by repeated squaring
    counts, order = {}, []
    for c in curves:
        if id(c) not in counts:
            order.append(c)
            counts[id(c)] = 0
        counts[id(c)] += 1
    result = None
    for c in order:
        part = self_convolve(curve_to_pld(c, cell, rounding, span), counts[id(c)])
        result = part if result is None else convolve(result, part)
    return result


def compose_tensor(curves: Sequence[TradeoffCurve], cell: float = DEFAULT_CELL,
                   span: float = DEFAULT_SPAN) -> ComposeReport:
    """Certified lower and upper curves for f_1 x ... x f_m."""
    curves = list(curves)
    if not curves:
        raise DomainError("need at least one curve")
    cell = float(cell)
    if not cell > 0:
        raise DomainError(f"cell must be positive, got {cell}")
    forward = tuple(_compose_plds(curves, cell, r, span) for r in Rounding)
    inverse = None
    if not all(c.symmetric for c in curves):
        inverted, cache = [], {}
        for c in curves:
            if id(c) not in cache:
                cache[id(c)] = invert(c)
            inverted.append(cache[id(c)])
        inverse = tuple(_compose_plds(inverted, cell, r, span) for r in Rounding)
    plds = forward + (inverse or ())
    diagnostics = {
        "cell": cell,
        "span": span,
        "m": len(curves),
        "truncated_mass": max(p.truncated for p in plds),
        "lattice_points": max(p.mass.size for p in plds),
        "certified": True,
    }
    return ComposeReport(ComposeMethod.FFT, forward=forward, inverse=inverse,
                         diagnostics=diagnostics)


def compose_closed_form(mus: Sequence[float]) -> ComposeReport:
    g = make_gaussian(compose_gaussian(mus))
    return ComposeReport(ComposeMethod.CLOSED_FORM, lower=g, upper=g,
                         diagnostics={"mu": g.mu, "certified": True})


# ---------------------------------------------------------------------------
# central limit approximation

def clt_functionals(curve: TradeoffCurve) -> CltFunctionals:
    """kl = -int log(-f'), kappa2 = int log^2(-f'), i.e. E_P[L] and E_P[L^2]."""
    if curve.p_infinite > 0:
        return CltFunctionals(math.inf, math.inf)
    kl = curve.loss_expectation(lambda loss: loss)
    kappa2 = curve.loss_expectation(lambda loss: loss * loss)
    if not (math.isfinite(kl) and math.isfinite(kappa2)):
        return CltFunctionals(math.inf, math.inf)
    return CltFunctionals(max(kl, 0.0), kappa2)


def clt_mu(curves: Sequence[TradeoffCurve]):
    """mu = 2 sum kl / sqrt(sum kappa2) and the functional sums."""
    funcs = [clt_functionals(c) for c in curves]
    kl = math.fsum(f.kl for f in funcs)
    kappa2 = math.fsum(f.kappa2 for f in funcs)
    if not (math.isfinite(kl) and math.isfinite(kappa2)):
        raise AccountingError("a curve has infinite CLT functionals; use the FFT method")
    mu = 0.0 if kappa2 == 0 else 2.0 * kl / math.sqrt(kappa2)
    return mu, {"kl_sum": kl, "kappa2_sum": kappa2, "mu": mu, "certified": False}


def clt_compose(curves: Sequence[TradeoffCurve]) -> GaussianCurve:
    """Gaussian approximation to f_1 x ... x f_m; no error bar."""
    mu, _ = clt_mu(curves)
    return make_gaussian(mu)


def clt_report(curves: Sequence[TradeoffCurve]) -> ComposeReport:
    mu, diagnostics = clt_mu(curves)
    g = make_gaussian(mu)
    return ComposeReport(ComposeMethod.CLT, lower=g, upper=g, diagnostics=diagnostics)


# ---------------------------------------------------------------------------
# Edgeworth accountant

class LossRVSpec:
    """Law of the per-step privacy loss under each hypothesis.

    ``x`` is the loss under the null (Q) and ``y`` under the alternative (P),
    so that delta(eps) = P(Y > eps) - e^eps P(X > eps) for one step.
    """

    def cumulants(self, tol: float = CUMULANT_TOL):
        """((k1..k4) of X, (k1..k4) of Y, worst quadrature residual)."""
        raise NotImplementedError


def _cumulants_from(expect):
    mean, r1 = expect(lambda v: v)
    centred = [expect(lambda v, k=k: (v - mean) ** k) for k in (2, 3, 4)]
    m2, m3, m4 = (c[0] for c in centred)
    resid = max([r1] + [c[1] for c in centred])
    return np.array([mean, m2, m3, m4 - 3 * m2 * m2]), resid


@dataclass(frozen=True)
class SubsampledGaussianStep(LossRVSpec):
    """One DP-SGD step: N(0, 1) against (1 - p) N(0, 1) + p N(1/sigma, 1)."""

    p: float
    sigma: float

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0 or not self.sigma > 0:
            raise DomainError("need 0 <= p <= 1 and sigma > 0")

    def _loss(self, v):
        a = v / self.sigma - 0.5 / self.sigma ** 2
        if self.p == 1.0:
            return a
        small = np.log1p(self.p * np.expm1(np.minimum(a, 30.0)))
        large = np.logaddexp(math.log1p(-self.p), math.log(self.p) + a)
        return np.where(a < 30.0, small, large)

    def cumulants(self, tol=CUMULANT_TOL):
        p, s = self.p, self.sigma

        def under_null(g):
            est, res = _quad.adaptive_normal_expectation(lambda v: g(self._loss(v)), tol=tol)
            return float(est), res

        def under_alt(g):
            a, ra = _quad.adaptive_normal_expectation(lambda v: g(self._loss(v)), tol=tol)
            b, rb = _quad.adaptive_normal_expectation(lambda v: g(self._loss(v)),
                                                      loc=1.0 / s, tol=tol)
            return float((1 - p) * a + p * b), max(ra, rb)

        try:
            kx, rx = _cumulants_from(under_null)
            ky, ry = _cumulants_from(under_alt)
        except AccountingError as err:
            raise AccountingError(f"cumulant quadrature failed: {err}") from None
        return kx, ky, max(rx, ry)


@dataclass(frozen=True)
class GaussianStep(LossRVSpec):
    mu: float

    def cumulants(self, tol=CUMULANT_TOL):
        v = self.mu ** 2
        return (np.array([-v / 2, v, 0.0, 0.0]), np.array([v / 2, v, 0.0, 0.0]), 0.0)


@dataclass(frozen=True)
class CustomLoss(LossRVSpec):
    """Discrete loss laws given as nodes and weights for X and Y."""

    x_nodes: tuple
    x_weights: tuple
    y_nodes: tuple
    y_weights: tuple

    def cumulants(self, tol=CUMULANT_TOL):
        def from_nodes(nodes, weights):
            nodes, weights = np.asarray(nodes, float), np.asarray(weights, float)
            if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
                raise DomainError("loss weights must be a probability vector")
            if not np.all(np.isfinite(nodes)):
                raise AccountingError("custom loss has infinite nodes")
            return _cumulants_from(lambda g: (float(np.dot(weights, g(nodes))), 0.0))[0]

        return (from_nodes(self.x_nodes, self.x_weights),
                from_nodes(self.y_nodes, self.y_weights), 0.0)


def _edgeworth_sf(x, kappa, m):
    """First-order Edgeworth approximation of P(S_m > x), S_m a sum of m copies."""
    mean, var = m * kappa[0], m * kappa[1]
    if var <= 0:
        return np.where(np.asarray(x) < mean, 1.0, 0.0)
    z = (np.asarray(x, dtype=float) - mean) / math.sqrt(var)
    skew = kappa[2] / kappa[1] ** 1.5
    return stats.norm.sf(z) + skew / (6.0 * math.sqrt(m)) * (z * z - 1.0) * stats.norm.pdf(z)


def edgeworth_delta(spec: LossRVSpec, m: int):
    """Callable eps -> delta from the two-orientation Edgeworth approximation."""
    m = int(m)
    if m < 1:
        raise DomainError("m must be positive")
    kx, ky, resid = spec.cumulants()
    flip = np.array([-1.0, 1.0, -1.0, 1.0])
    orientations = [(kx, ky), (flip * ky, flip * kx)]

    def delta(eps):
        eps = np.asarray(eps, dtype=float)
        worst = np.zeros_like(eps)
        for cx, cy in orientations:
            d = _edgeworth_sf(eps, cy, m) - np.exp(eps) * _edgeworth_sf(eps, cx, m)
            worst = np.maximum(worst, d)
        return np.clip(worst, 0.0, 1.0)

    delta.cumulants = {"x": kx.tolist(), "y": ky.tolist(), "residual": resid}
    return delta


def edgeworth_compose(spec: LossRVSpec, m: int, eps_grid: Sequence[float]) -> PrivacyProfile:
    """Privacy profile of m i.i.d. steps by the first-order Edgeworth expansion.

    The raw approximation need not be monotone; the returned deltas are the
    running maximum from the right, which only raises them.
    """
    grid = np.asarray(eps_grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("eps grid must be strictly increasing")
    raw = edgeworth_delta(spec, m)(grid)
    deltas = np.maximum.accumulate(raw[::-1])[::-1]
    return PrivacyProfile(tuple(EpsDeltaPoint(float(max(e, 0.0)), float(d))
                                for e, d in zip(grid, deltas)))


# ---------------------------------------------------------------------------
# DP-SGD

@dataclass
class DpsgdResult:
    eps: float
    curve: TradeoffCurve
    method: DpsgdMethod
    delta: float
    eps_lower: float = math.nan
    eps_upper: float = math.nan
    mu: float = math.nan
    diagnostics: dict = field(default_factory=dict)


def gdp_limit_mu(sigma: float, p: float, T: int) -> float:
    return p * math.sqrt(T * math.expm1(1.0 / sigma ** 2))


def dpsgd_account(sigma: float, p: float, T: int, method=DpsgdMethod.FFT,
                  delta: float = 1e-5, cell: float = DPSGD_CELL,
                  span: float = DPSGD_SPAN) -> DpsgdResult:
    """(eps, curve) for T steps of Gaussian noise sigma with sampling rate p.

    The curve is min{f, f^-1}** with f = (p G_{1/sigma} + (1 - p) Id)^{xT};
    for FFT the reported eps is the certified upper value.
    """
    method = DpsgdMethod(method)
    sigma, p, T, delta = float(sigma), float(p), int(T), float(delta)
    if not sigma > 0 or not 0.0 <= p <= 1.0 or T < 1 or not 0.0 < delta < 1.0:
        raise DomainError("need sigma > 0, 0 <= p <= 1, T >= 1 and 0 < delta < 1")
    if p == 0.0:
        return DpsgdResult(0.0, identity(), method, delta, 0.0, 0.0, 0.0,
                           {"note": "no record is ever touched"})
    if method is DpsgdMethod.GDP_LIMIT:
        mu = gdp_limit_mu(sigma, p, T)
        g = make_gaussian(mu)
        eps = eps_at_delta(g, delta)
        return DpsgdResult(eps, g, method, delta, eps, eps, mu,
                           {"certified": False, "note": "asymptotic limit, no error bound"})
    if method is DpsgdMethod.EDGEWORTH:
        fn = edgeworth_delta(SubsampledGaussianStep(p, sigma), T)
        eps = bisect_eps(lambda e: float(fn(e)), delta)
        grid = np.linspace(0.0, max(2.0 * eps if math.isfinite(eps) else 10.0, 1.0), 400)
        prof = edgeworth_compose(SubsampledGaussianStep(p, sigma), T, grid)
        curve = curve_from_profile(prof.eps, prof.deltas)
        return DpsgdResult(eps, curve, method, delta, eps, eps, math.nan,
                           {"certified": False, "cumulants": fn.cumulants})
    step = subsampled_curve(make_gaussian(1.0 / sigma), p)
    report = compose_tensor([step] * T, cell=cell, span=span)
    lo, hi = report.eps_bounds(delta)
    curve = _LazySymmetrized(report)
    return DpsgdResult(hi, curve, method, delta, lo, hi, math.nan,
                       dict(report.diagnostics))


class _LazySymmetrized(TradeoffCurve):
    """min{g, g^-1}** of the certified lower curve, built on first use."""

    kind = "piecewise_linear"
    symmetric = True

    def __init__(self, report: ComposeReport):
        self._report = report

    @functools.cached_property
    def _curve(self):
        return symmetrize(self._report.lower, SymmetrizeMode.MIN_BICONJUGATE)

    def _eval(self, a):
        return self._curve._eval(a)

    def to_piecewise(self, grid=None):
        return self._curve

    def __getattr__(self, name):
        if name.startswith("__") or name in ("_report", "_curve"):
            raise AttributeError(name)
        return getattr(self._curve, name)
