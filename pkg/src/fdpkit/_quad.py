"""Gauss-Hermite expectations under normal laws."""
from __future__ import annotations

import functools

import numpy as np
from scipy.special import roots_hermitenorm

from .errors import AccountingError

BASE_NODES = 200
MAX_NODES = 6400


@functools.lru_cache(maxsize=None)
def _rule(n):
    x, w = roots_hermitenorm(n)
    return x, w / np.sqrt(2.0 * np.pi)


def normal_expectation(g, loc=0.0, scale=1.0, n=BASE_NODES):
    """E[g(loc + scale * Z)] for Z ~ N(0, 1) with a fixed n-node rule.

    ``g`` is vectorized and may return shape (..., n); the leading axes are kept.
    """
    x, w = _rule(n)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        values = np.asarray(g(loc + scale * x), dtype=float)
    return values @ w


def adaptive_normal_expectation(g, loc=0.0, scale=1.0, tol=1e-10):
    """Doubles the node count from 200 until successive estimates agree to tol.

    Returns:
        (estimate, residual) where residual is the last observed change.

    Raises:
        AccountingError: if MAX_NODES is reached without agreement.
    """
    n = BASE_NODES
    prev = normal_expectation(g, loc, scale, n)
    while True:
        n *= 2
        cur = normal_expectation(g, loc, scale, n)
        residual = float(np.max(np.abs(np.asarray(cur) - np.asarray(prev))))
        if residual < tol:
            return cur, residual
        if n >= MAX_NODES:
            raise AccountingError(
                    f"quadrature did not converge: change {residual:.3g} at {n} nodes")
        prev = cur
