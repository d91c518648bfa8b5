"""Mechanism catalog: specifications that yield trade-off curves."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .curve import (DiscreteDistribution, PiecewiseLinearCurve, SubsampledCurve,
                    TradeoffCurve, identity, make_eps_delta, make_gaussian, make_grid,
                    to_distribution_pair)
from .errors import ConstructionError, DomainError

DG_TAIL_BUDGET = 1e-20
CND_TOL = 1e-6
CND_MAX_STEPS = 10_000


# ---------------------------------------------------------------------------
# curves

def gaussian_mechanism(sensitivity: float, sigma: float) -> TradeoffCurve:
    """Additive N(0, sigma^2) noise on a query of the given sensitivity."""
    sensitivity, sigma = float(sensitivity), float(sigma)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if not sensitivity >= 0:
        raise DomainError(f"sensitivity must be >= 0, got {sensitivity}")
    return make_gaussian(sensitivity / sigma)


def pure_dp_mechanism(eps: float) -> TradeoffCurve:
    return make_eps_delta(eps, 0.0)


def discrete_gaussian_support(sigma: float, shift: int):
    """Truncated support and the two pmfs of N_Z(0, s^2) and N_Z(shift, s^2).

    The support is symmetric under x -> shift - x so the pair swaps exactly.
    Returns (x, p, q, tail) with ``tail`` the discarded mass under either law.
    """
    n = int(math.ceil(10 * sigma + 10 + shift))
    x = np.arange(-n, n + shift + 1)
    wide = np.arange(-n - 60 * int(math.ceil(sigma)) - 60, n + shift + 60 * int(math.ceil(sigma)) + 61)
    def pmf(support, centre):
        return np.exp(-((support - centre) ** 2) / (2.0 * sigma * sigma))
    full = pmf(wide, 0)
    inside = (wide >= -n) & (wide <= n + shift)
    tail = math.fsum(full[~inside]) / math.fsum(full)
    p = pmf(x, 0)
    q = pmf(x, shift)
    p /= math.fsum(p)
    q /= math.fsum(q)
    return x, p, q, tail


def discrete_gaussian_curve(sigma: float, shift: int = 1) -> PiecewiseLinearCurve:
    """Exact T(N_Z(0, sigma^2), N_Z(shift, sigma^2)) over the truncated support."""
    sigma = float(sigma)
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")
    if int(shift) != shift or shift < 1:
        raise DomainError(f"shift must be a positive integer, got {shift}")
    x, p, q, tail = discrete_gaussian_support(sigma, int(shift))
    if not tail < DG_TAIL_BUDGET:
        raise ConstructionError(f"truncated tail mass {tail} exceeds budget", worst=tail)
    # the likelihood ratio p/q decreases in x, so ascending loss is descending x
    return PiecewiseLinearCurve.from_masses(p, q, symmetric=True)


def subsampled_curve(base: TradeoffCurve, p: float) -> TradeoffCurve:
    """alpha -> p * base(alpha) + (1 - p) * (1 - alpha)."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p}")
    if p == 0.0:
        return identity()
    if p == 1.0:
        return base
    return SubsampledCurve(base, p)


def _pessimistic_piecewise(curve: TradeoffCurve) -> PiecewiseLinearCurve:
    """Lattice lower bound on an analytic curve, tight in both orientations.

    A pessimistic PLD leaves its rounding deficit at alpha = 0, so the forward
    curve alone is loose near the beta axis. The inverse curve's PLD covers
    that end; the pointwise max of two lower bounds is still a lower bound.
    """
    from .curve import InverseCurve, _merged_knots, invert
    from .pld import Rounding, curve_to_pld, pld_to_curve
    fwd = pld_to_curve(curve_to_pld(curve, rounding=Rounding.PESSIMISTIC))
    other = curve if curve.symmetric else InverseCurve(curve)
    bwd = invert(pld_to_curve(curve_to_pld(other, rounding=Rounding.PESSIMISTIC)))
    xs = _merged_knots(fwd, bwd)
    return PiecewiseLinearCurve(xs, np.maximum(fwd(xs), bwd(xs)), symmetric=curve.symmetric,
                                validate=False)


def _as_pair(component):
    if isinstance(component, MechanismSpec):
        component = component.curve()
    if isinstance(component, TradeoffCurve):
        if not isinstance(component, PiecewiseLinearCurve) and not hasattr(component, "_pwl"):
            component = _pessimistic_piecewise(component)
        return to_distribution_pair(component)
    P, Q = component
    return P, Q


def mixture_bound(components: Sequence, weights: Sequence[float]) -> PiecewiseLinearCurve:
    """Lower bound on T(sum w_i P_i, sum w_i Q_i) from the component pairs.

    A shared threshold r on dQ_i/dP_i (randomized with c at ties) gives the
    point (sum w_i alpha_i(r, c), sum w_i T(P_i, Q_i)(alpha_i(r, c))). Sweeping
    r over every component ratio traces the Neyman-Pearson curve of the pair
    labelled by component, so the sweep is convex and already its own envelope.
    """
    weights = np.asarray(weights, dtype=float)
    if len(components) != weights.size or weights.size == 0:
        raise DomainError("components and weights must be non-empty and of equal length")
    if np.any(weights < 0) or abs(math.fsum(weights) - 1.0) > 1e-12:
        raise DomainError("weights must be nonnegative and sum to 1")
    p_parts, q_parts = [], []
    for w, component in zip(weights, components):
        P, Q = _as_pair(component)
        p_parts.append(w * P.mass)
        q_parts.append(w * P.aligned(Q))
    p = np.concatenate(p_parts)
    q = np.concatenate(q_parts)
    live = (p > 0) | (q > 0)
    p, q = p[live], q[live]
    with np.errstate(divide="ignore"):
        loss = np.log(p) - np.log(q)
    levels, inverse = np.unique(loss, return_inverse=True)
    return PiecewiseLinearCurve.from_masses(
        np.bincount(inverse, weights=p, minlength=levels.size),
        np.bincount(inverse, weights=q, minlength=levels.size))


# ---------------------------------------------------------------------------
# specifications

class MechanismSpec:
    kind = "abstract"

    def curve(self) -> TradeoffCurve:
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class GaussianSpec(MechanismSpec):
    sensitivity: float
    sigma: float
    kind = "Gaussian"

    def curve(self):
        return gaussian_mechanism(self.sensitivity, self.sigma)

    def to_dict(self):
        return {"kind": self.kind, "sensitivity": self.sensitivity, "sigma": self.sigma}


@dataclass(frozen=True)
class PureDPSpec(MechanismSpec):
    eps: float
    kind = "PureDP"

    def curve(self):
        return pure_dp_mechanism(self.eps)

    def to_dict(self):
        return {"kind": self.kind, "eps": self.eps}


@dataclass(frozen=True)
class DiscreteGaussianSpec(MechanismSpec):
    sigma: float
    shift: int = 1
    kind = "DiscreteGaussian"

    def curve(self):
        return discrete_gaussian_curve(self.sigma, self.shift)

    def to_dict(self):
        return {"kind": self.kind, "sigma": self.sigma, "shift": self.shift}


@dataclass(frozen=True)
class SubsampledSpec(MechanismSpec):
    base: MechanismSpec
    p: float
    kind = "Subsampled"

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise DomainError(f"p must lie in [0, 1], got {self.p}")

    def curve(self):
        return subsampled_curve(self.base.curve(), self.p)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "p": self.p}


Component = Union[MechanismSpec, tuple]


@dataclass(frozen=True)
class MixtureSpec(MechanismSpec):
    components: tuple
    weights: tuple
    kind = "Mixture"

    def __post_init__(self):
        if len(self.components) != len(self.weights):
            raise DomainError("components and weights differ in length")
        if abs(math.fsum(self.weights) - 1.0) > 1e-12 or min(self.weights) < 0:
            raise DomainError("weights must be nonnegative and sum to 1")

    def curve(self):
        return mixture_bound(list(self.components), self.weights)

    def to_dict(self):
        comps = []
        for c in self.components:
            if isinstance(c, MechanismSpec):
                comps.append(c.to_dict())
            else:
                comps.append({"P": c[0].mass.tolist(), "Q": c[0].aligned(c[1]).tolist()})
        return {"kind": self.kind, "components": comps, "weights": list(self.weights)}


def spec_from_dict(data: dict) -> MechanismSpec:
    """Parses the tagged-union JSON form of a mechanism."""
    if "P" in data and "Q" in data and "kind" not in data:
        raise DomainError("a distribution pair is only valid as a mixture component")
    kind = data.get("kind")
    try:
        if kind == "Gaussian":
            return GaussianSpec(float(data["sensitivity"]), float(data["sigma"]))
        if kind == "PureDP":
            return PureDPSpec(float(data["eps"]))
        if kind == "DiscreteGaussian":
            return DiscreteGaussianSpec(float(data["sigma"]), int(data.get("shift", 1)))
        if kind == "Subsampled":
            return SubsampledSpec(spec_from_dict(data["base"]), float(data["p"]))
        if kind == "Mixture":
            comps = []
            for c in data["components"]:
                if "kind" in c:
                    comps.append(spec_from_dict(c))
                else:
                    comps.append((DiscreteDistribution.from_masses(c["P"]),
                                  DiscreteDistribution.from_masses(c["Q"])))
            return MixtureSpec(tuple(comps), tuple(float(w) for w in data["weights"]))
    except KeyError as err:
        raise DomainError(f"mechanism {kind!r} is missing field {err}") from None
    raise DomainError(f"unknown mechanism kind {kind!r}")


# ---------------------------------------------------------------------------
# canonical noise

@dataclass(frozen=True, eq=False)
class NoiseDistribution:
    """Symmetric noise Z with T(Z, Z + 1) equal to ``tradeoff_target``.

    The CDF is linear on [-1/2, 1/2], from c to 1 - c where f(c) = c, and is
    extended one unit at a time by F(x) = 1 - f(F(x - 1)) to the right and
    F(x) = f(1 - F(x + 1)) to the left.
    """

    tradeoff_target: TradeoffCurve
    c: float

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        f = self.tradeoff_target
        c = self.c
        k = np.zeros(x.shape, dtype=np.int64)
        finite = np.isfinite(x)
        k[finite] = np.where(np.abs(x[finite]) > 0.5,
                             np.ceil(np.abs(x[finite]) - 0.5), 0).astype(np.int64)
        k = np.minimum(k, CND_MAX_STEPS)
        sign = np.sign(x)
        base = np.where(finite, x - sign * k, 0.0)
        u = c * (0.5 - base) + (1.0 - c) * (base + 0.5)
        for step in range(int(k.max(initial=0))):
            active = k > step
            if not np.any(active):
                break
            right = active & (sign > 0)
            left = active & (sign < 0)
            if np.any(right):
                u[right] = 1.0 - f(np.clip(u[right], 0.0, 1.0))
            if np.any(left):
                u[left] = f(np.clip(1.0 - u[left], 0.0, 1.0))
        u = np.where(np.isposinf(x), 1.0, np.where(np.isneginf(x), 0.0, u))
        u = np.clip(u, 0.0, 1.0)
        return float(u[0]) if scalar else u

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        scalar = u.ndim == 0
        u = np.atleast_1d(u).copy()
        if np.any((u < 0) | (u > 1)):
            raise DomainError("quantile levels must lie in [0, 1]")
        f = self.tradeoff_target
        c = self.c
        shift = np.zeros_like(u)
        done = (u >= c) & (u <= 1.0 - c)
        out = np.full_like(u, np.nan)
        out[u == 0.0] = -np.inf
        out[u == 1.0] = np.inf
        pending = ~done & (u > 0.0) & (u < 1.0)
        for _ in range(CND_MAX_STEPS):
            if not np.any(pending):
                break
            hi = pending & (u > 1.0 - c)
            lo = pending & (u < c)
            if np.any(hi):
                u[hi] = f(1.0 - u[hi])
                shift[hi] += 1.0
            if np.any(lo):
                u[lo] = 1.0 - f(u[lo])
                shift[lo] -= 1.0
            inner = (u >= c) & (u <= 1.0 - c)
            done |= pending & inner
            pending &= ~inner
        mid = done
        if c < 0.5:
            out[mid] = (u[mid] - 0.5) / (1.0 - 2.0 * c) + shift[mid]
        else:
            out[mid] = shift[mid]
        return float(out[0]) if scalar else out

    def shift_tradeoff(self, delta: float, alphas):
        """alpha -> F(F^{-1}(1 - alpha) - delta), the ROC of threshold tests."""
        alphas = np.asarray(alphas, dtype=float)
        return self.cdf(self.quantile(1.0 - alphas) - delta)


def _fixed_point(f: TradeoffCurve) -> float:
    lo, hi = 0.0, 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > mid:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lattice_cdf(dist: NoiseDistribution, width: float = 1e-3, floor: float = 1e-16,
                cap: int = 200):
    """F on the lattice -1/2 + width * Z, extended until both tails drop below ``floor``.

    ``1 / width`` must be an integer so that each unit block maps onto the
    next through the recursion. Returns (xs, F).
    """
    m = int(round(1.0 / width))
    if abs(m * width - 1.0) > 1e-12:
        raise DomainError("lattice width must divide 1")
    f, c = dist.tradeoff_target, dist.c
    base = -0.5 + np.arange(m + 1) / m
    block = c * (0.5 - base) + (1.0 - c) * (base + 0.5)
    right, left = [block], [block]
    k = 0
    while k < cap and 1.0 - right[-1][-1] > floor:
        right.append(1.0 - f(np.clip(right[-1], 0.0, 1.0)))
        left.append(f(np.clip(1.0 - left[-1], 0.0, 1.0)))
        k += 1
    values = np.concatenate([b[:-1] for b in left[:0:-1]] + [block] +
                            [b[1:] for b in right[1:]])
    xs = (np.arange(values.size) - k * m) / m - 0.5
    return xs, values


def binned_shift_tradeoff(dist: NoiseDistribution, delta: float, width: float = 1e-3,
                          lattice=None):
    """Neyman-Pearson curve of (Z, Z + delta) after binning the line.

    Bin masses come from exact CDF differences and the two tails form their
    own bins. Binning is post-processing, so this curve lies on or above the
    true T(Z, Z + delta); it is exact when both densities are constant on every
    bin, which is the case for piecewise-linear targets. ``delta`` must be a
    multiple of ``width``.
    """
    xs, F = lattice_cdf(dist, width) if lattice is None else lattice
    shift = int(round(delta / width))
    fp = F[shift:]
    fq = F[:F.size - shift]
    p = np.concatenate([[fp[0]], np.diff(fp), [1.0 - fp[-1]]])
    q = np.concatenate([[fq[0]], np.diff(fq), [1.0 - fq[-1]]])
    p, q = np.clip(p, 0.0, None), np.clip(q, 0.0, None)
    return PiecewiseLinearCurve.from_masses(p / math.fsum(p), q / math.fsum(q))


def validate_cnd(dist: NoiseDistribution, tol: float = CND_TOL, n_grid: int = 2001) -> dict:
    """Worst violation of each canonical-noise property on a grid.

    Property 1 is checked for shifts 0.1, ..., 1.0 against the binned
    Neyman-Pearson curve of (Z, Z + shift): it must dominate the target and
    equal it at shift 1. Property 2 is the identity
    T(Z, Z + 1)(alpha) = F(F^{-1}(1 - alpha) - 1), with the right side checked
    against the target. Property 3 is F(x) = 1 - F(-x).
    """
    f = dist.tradeoff_target
    alphas = np.linspace(0.0, 1.0, n_grid)
    target = f(alphas)
    lattice = lattice_cdf(dist)
    dominance = 0.0
    for delta in np.round(np.arange(1, 11) / 10, 12):
        binned = binned_shift_tradeoff(dist, delta, lattice=lattice)
        dominance = max(dominance, float(np.max(target - binned(alphas))))
    equality = float(np.max(np.abs(binned(alphas) - target)))
    identity_gap = float(np.max(np.abs(dist.shift_tradeoff(1.0, alphas) - target)))
    xs = np.linspace(-8.0, 8.0, 3201)
    symmetry = float(np.max(np.abs(dist.cdf(xs) - (1.0 - dist.cdf(-xs)))))
    return {
        "dominance": max(dominance, 0.0),
        "equality": equality,
        "identity": identity_gap,
        "symmetry": symmetry,
        "median": abs(dist.cdf(0.0) - 0.5),
    }


def construct_cnd(target: TradeoffCurve, tol: float = CND_TOL) -> NoiseDistribution:
    """Canonical noise distribution for a symmetric, nontrivial target."""
    grid = make_grid(2000)
    vals = target(grid)
    if not np.any(vals < 1.0 - grid - 1e-9):
        raise DomainError("target is trivial (equals the identity curve)")
    if not target.symmetric:
        from .curve import invert, sup_distance
        if sup_distance(target, invert(target), 2000) > 1e-9:
            raise DomainError("target must be symmetric")
    dist = NoiseDistribution(target, _fixed_point(target))
    report = validate_cnd(dist, tol)
    worst_key = max(report, key=report.get)
    if report[worst_key] > tol:
        raise ConstructionError(f"canonical noise fails {worst_key}: {report[worst_key]:.3g}",
                                worst=report[worst_key])
    return dist


def cnd_sample(dist: NoiseDistribution, rng: np.random.Generator, n: int) -> np.ndarray:
    """n draws by the quantile transform; deterministic given the generator state."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be positive")
    return dist.quantile(rng.random(n))
