"""Lattice privacy-loss distributions with directed rounding.

A PLD stores the law of ``L = log dP/dQ`` under ``P`` on the lattice
``cell * k``. Finite atoms carry P-mass ``p_k``; the implied Q-mass is
``p_k * exp(-cell * k)``. Sentinels hold the mass that does not fit:

* ``p_pos_inf``: P-mass at ``L = +inf`` (outcomes impossible under Q);
* ``q_neg_inf``: Q-mass at ``L = -inf`` (outcomes impossible under P);
* ``p_neg_inf``: P-mass rounded down to ``-inf`` (optimistic PLDs only).

Pessimistic PLDs round every loss up. The result is a genuine pair of
distributions whose trade-off curve lies below the true one. Optimistic PLDs
round losses down while keeping the P-masses; the implied Q-masses then sum to
more than one, so the object is only a device for computing upper curves and
lower hockey-stick values.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from .curve import PiecewiseLinearCurve, TradeoffCurve
from .duality import bisect_eps
from .errors import DomainError

DEFAULT_CELL = 1e-4
DEFAULT_SPAN = 30.0
# masses below this at the lattice ends are folded into the neighbours in the
# rounding direction; the total moved is recorded in ``truncated``
TAIL_FLOOR = 1e-30
# sparse direct sums below this many products, dense direct below the next,
# FFT above; direct sums keep tiny tail masses accurate to relative precision
DIRECT_LIMIT = 200_000
DENSE_LIMIT = 50_000_000
SNAP_TOL = 1e-9


class Rounding(enum.Enum):
    PESSIMISTIC = "Pessimistic"
    OPTIMISTIC = "Optimistic"


@dataclass(frozen=True, eq=False)
class PrivacyLossDistribution:
    offset: int
    mass: np.ndarray
    cell: float
    rounding: Rounding
    p_pos_inf: float = 0.0
    p_neg_inf: float = 0.0
    q_neg_inf: float = 0.0
    span: float = DEFAULT_SPAN
    truncated: float = field(default=0.0)

    @property
    def losses(self) -> np.ndarray:
        return (self.offset + np.arange(self.mass.size)) * self.cell

    @property
    def mass_p(self) -> np.ndarray:
        """P-masses at ``-inf``, the finite lattice and ``+inf``."""
        return np.concatenate([[self.p_neg_inf], self.mass, [self.p_pos_inf]])

    @property
    def max_index(self) -> int:
        return int(math.ceil(self.span / self.cell - SNAP_TOL))

    def total_p(self) -> float:
        return math.fsum(self.mass) + self.p_pos_inf + self.p_neg_inf

    def implied_q(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.mass * np.exp(-self.losses)

    def total_q(self) -> float:
        return math.fsum(self.implied_q()) + self.q_neg_inf

    def hockey_stick(self, eps: float) -> float:
        """H_{e^eps}(P, Q) = E_P[(1 - e^(eps - L))_+].

        Pessimistic PLDs give an upper bound on the true value and optimistic
        ones a lower bound.
        """
        # losses above eps occupy a contiguous tail of the lattice
        start = max(0, int(math.floor(eps / self.cell)) - self.offset + 1)
        losses = (self.offset + np.arange(start, self.mass.size)) * self.cell
        terms = self.mass[start:] * -np.expm1(eps - losses)
        return min(1.0, float(np.sum(np.maximum(terms, 0.0))) + self.p_pos_inf)

    def eps_at_delta(self, delta: float) -> float:
        if not 0.0 < delta <= 1.0:
            raise DomainError(f"delta must lie in (0, 1], got {delta}")
        return bisect_eps(self.hockey_stick, delta)

    def to_dict(self) -> dict:
        return {
            "offset": self.offset,
            "mass": self.mass.tolist(),
            "cell": self.cell,
            "rounding": self.rounding.value,
            "p_pos_inf": self.p_pos_inf,
            "p_neg_inf": self.p_neg_inf,
            "q_neg_inf": self.q_neg_inf,
            "span": self.span,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PrivacyLossDistribution":
        return cls(int(data["offset"]), np.asarray(data["mass"], dtype=float),
                   float(data["cell"]), Rounding(data["rounding"]),
                   float(data["p_pos_inf"]), float(data["p_neg_inf"]),
                   float(data["q_neg_inf"]), float(data["span"]))


def _check_cell(cell: float) -> float:
    cell = float(cell)
    if not (cell > 0 and math.isfinite(cell)):
        raise DomainError(f"cell must be positive, got {cell}")
    return cell


def _finish(offset, mass, cell, rounding, p_pos, p_neg, span, moved=0.0):
    """Clamps to the span, folds negligible tails and fills the Q sentinel."""
    mass = np.clip(np.asarray(mass, dtype=float), 0.0, None)
    K = int(math.ceil(span / cell - SNAP_TOL))
    pess = rounding is Rounding.PESSIMISTIC
    lo, hi = offset, offset + mass.size - 1
    if hi > K:
        cut = hi - K if lo <= K else mass.size
        over = math.fsum(mass[mass.size - cut:])
        mass = mass[:mass.size - cut]
        if pess or mass.size == 0:
            p_pos += over
        else:
            mass[-1] += over
        moved += over
    if mass.size and offset < -K:
        cut = min(-K - offset, mass.size)
        under = math.fsum(mass[:cut])
        mass = mass[cut:]
        offset += cut
        if pess and mass.size:
            mass[0] += under
        elif pess:
            mass, offset = np.array([under]), -K
        else:
            p_neg += under
        moved += under
    # fold tails below the floor in the rounding direction
    live = np.nonzero(mass > TAIL_FLOOR)[0]
    if live.size == 0 and mass.size:
        live = np.array([int(np.argmax(mass))])
    if mass.size:
        first, last = int(live[0]), int(live[-1])
        head = math.fsum(mass[:first])
        tail = math.fsum(mass[last + 1:])
        mass = mass[first:last + 1].copy()
        offset += first
        if pess:
            mass[0] += head
            p_pos += tail
        else:
            p_neg += head
            mass[-1] += tail
        moved += head + tail
    pld = PrivacyLossDistribution(int(offset), mass, cell, rounding,
                                  float(p_pos), float(p_neg), 0.0, float(span),
                                  float(moved))
    q_neg = max(0.0, 1.0 - math.fsum(pld.implied_q())) if pess else 0.0
    object.__setattr__(pld, "q_neg_inf", q_neg)
    return pld


def identity_pld(cell: float = DEFAULT_CELL, rounding=Rounding.PESSIMISTIC,
                 span: float = DEFAULT_SPAN) -> PrivacyLossDistribution:
    """PLD of two identical distributions: all mass at loss 0."""
    return PrivacyLossDistribution(0, np.ones(1), _check_cell(cell), Rounding(rounding),
                                   span=float(span))


def _from_segments(curve: PiecewiseLinearCurve, cell, rounding, span):
    p, q, loss = curve.segments()
    p_pos = math.fsum(p[np.isposinf(loss)])
    finite = np.isfinite(loss)
    p, loss = p[finite], loss[finite]
    if p.size == 0:
        return _finish(0, np.zeros(1), cell, rounding, p_pos, 0.0, span)
    scaled = loss / cell
    if rounding is Rounding.PESSIMISTIC:
        idx = np.ceil(scaled - SNAP_TOL)
    else:
        idx = np.floor(scaled + SNAP_TOL)
    idx = idx.astype(np.int64)
    offset = int(idx.min())
    mass = np.bincount(idx - offset, weights=p)
    return _finish(offset, mass, cell, rounding, p_pos, 0.0, span)


def curve_to_pld(curve: TradeoffCurve, cell: float = DEFAULT_CELL,
                 rounding=Rounding.PESSIMISTIC, span: float = DEFAULT_SPAN
                 ) -> PrivacyLossDistribution:
    """Loss law of ``curve`` snapped to the lattice in the rounding direction."""
    cell = _check_cell(cell)
    rounding = Rounding(rounding)
    if isinstance(curve, PiecewiseLinearCurve):
        return _from_segments(curve, cell, rounding, span)
    if hasattr(curve, "_pwl"):
        return _from_segments(curve._pwl, cell, rounding, span)
    K = int(math.ceil(span / cell - SNAP_TOL))
    edges = np.arange(-K, K + 1) * cell
    p_inf = curve.p_infinite
    if rounding is Rounding.PESSIMISTIC:
        # mass of (t_{k-1}, t_k] lands on t_k; below -K clamps to -K
        cdf = np.asarray(curve.loss_cdf(edges), dtype=float)
        sf = np.asarray(curve.loss_sf(edges), dtype=float)
        from_cdf = np.diff(cdf, prepend=0.0)
        from_sf = np.concatenate([[1.0 - sf[0]], sf[:-1] - sf[1:]])
        mass = np.where(cdf < 0.5, from_cdf, from_sf)
        return _finish(-K, mass, cell, rounding, float(sf[-1]), 0.0, span)
    # mass of [t_k, t_{k+1}) lands on t_k; below -K goes to -inf
    cdf = np.asarray(curve.loss_cdf(edges, strict=True), dtype=float)
    sf = np.asarray(curve.loss_sf(edges, strict=True), dtype=float)
    from_cdf = np.diff(cdf, append=1.0 - p_inf)
    from_sf = np.append(sf[:-1] - sf[1:], sf[-1] - p_inf)
    mass = np.where(cdf < 0.5, from_cdf, from_sf)
    return _finish(-K, mass, cell, rounding, p_inf, float(cdf[0]), span)


def pld_to_curve(pld: PrivacyLossDistribution) -> PiecewiseLinearCurve:
    """Trade-off curve obtained by thresholding on the loss.

    Pessimistic input yields a curve below the true one; optimistic input
    yields the lower convex hull of the pseudo-curve together with (0, 1) and
    (1, 0), which lies above the true curve.
    """
    q = pld.implied_q()
    if pld.rounding is Rounding.PESSIMISTIC:
        p_all = np.concatenate([[0.0], pld.mass, [pld.p_pos_inf]])
        q_all = np.concatenate([[pld.q_neg_inf], q, [0.0]])
        return PiecewiseLinearCurve.from_masses(p_all, q_all)
    ld = np.longdouble
    alphas = pld.p_neg_inf + np.concatenate([[ld(0)], np.cumsum(pld.mass.astype(ld))])
    betas = np.concatenate([np.cumsum(q[::-1].astype(ld))[::-1], [ld(0)]])
    alphas = alphas.astype(float)
    betas = betas.astype(float)
    # tangent from (0, 1) to the convex chain of pseudo-knots
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = np.where(alphas > 0, (betas - 1.0) / alphas, np.inf)
    j = int(np.argmin(slope))
    if alphas[j] <= 0 or betas[j] >= 1.0 - alphas[j]:
        ax, bx = np.array([0.0, 1.0]), np.array([1.0, 0.0])
    else:
        ax = np.concatenate([[0.0], alphas[j:], [1.0]])
        bx = np.concatenate([[1.0], betas[j:], [0.0]])
    ax = np.clip(ax, 0.0, 1.0)
    bx = np.clip(bx, 0.0, 1.0 - ax)
    return PiecewiseLinearCurve(ax, bx, validate=False)


def _convolve_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ia, ib = np.nonzero(a)[0], np.nonzero(b)[0]
    if ia.size * ib.size <= DIRECT_LIMIT:
        # sparse direct sum: exact zeros stay zero
        out = np.zeros(a.size + b.size - 1)
        np.add.at(out, (ia[:, None] + ib[None, :]).ravel(),
                  (a[ia][:, None] * b[ib][None, :]).ravel())
        return out
    if a.size * b.size <= DENSE_LIMIT:
        return np.convolve(a, b)
    return signal.fftconvolve(a, b)


def convolve(a: PrivacyLossDistribution, b: PrivacyLossDistribution) -> PrivacyLossDistribution:
    """PLD of the product pair: losses add, sentinels absorb."""
    if not math.isclose(a.cell, b.cell, rel_tol=1e-12, abs_tol=0.0):
        raise DomainError("cannot convolve PLDs with different cells")
    if a.rounding is not b.rounding:
        raise DomainError("cannot convolve PLDs with different rounding")
    a_fin, b_fin = math.fsum(a.mass), math.fsum(b.mass)
    # -inf absorbs everything; +inf absorbs finite losses
    p_neg = a.p_neg_inf + b.p_neg_inf - a.p_neg_inf * b.p_neg_inf
    p_pos = a.p_pos_inf * b_fin + a_fin * b.p_pos_inf + a.p_pos_inf * b.p_pos_inf
    mass = _convolve_arrays(a.mass, b.mass)
    return _finish(a.offset + b.offset, mass, a.cell, a.rounding, max(p_pos, 0.0),
                   max(p_neg, 0.0), max(a.span, b.span), a.truncated + b.truncated)


def self_convolve(pld: PrivacyLossDistribution, m: int) -> PrivacyLossDistribution:
    """m-fold composition by repeated squaring; m = 0 gives the identity."""
    m = int(m)
    if m < 0:
        raise DomainError("m must be nonnegative")
    result = None
    base = pld
    while m:
        if m & 1:
            result = base if result is None else convolve(result, base)
        m >>= 1
        if m:
            base = convolve(base, base)
    if result is None:
        return identity_pld(pld.cell, pld.rounding, pld.span)
    return result
