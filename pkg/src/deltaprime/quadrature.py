"""Integrals of (1 - t^2)^alpha over subintervals of [-1, 1].

These are the only integrals the closed-form mass and action need. For
``alpha < 0`` the integrand blows up at t = 1; the substitution
``1 - t = v^p`` with ``p = k / (alpha + 1)`` absorbs the ``(1 - t)^alpha``
factor exactly and leaves ``p v^{k-1} (2 - v^p)^alpha``, which is bounded
and smooth enough for Gauss-Legendre once ``p >= 2``.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

GL_START = 64
GL_MAX = 4096
REL_TOL = 1e-12


@lru_cache(maxsize=None)
def _leggauss(n: int):
    return roots_legendre(n)


def gauss_legendre(func, a: float, b: float, rel_tol: float = REL_TOL,
                   n_start: int = GL_START, n_max: int = GL_MAX) -> float:
    """Gauss-Legendre on [a, b], doubling the order until two values agree."""
    if a == b:
        return 0.0
    half, mid = 0.5 * (b - a), 0.5 * (b + a)
    prev = None
    n = n_start
    while n <= n_max:
        x, w = _leggauss(n)
        val = half * float(np.dot(w, func(mid + half * x)))
        if prev is not None and abs(val - prev) <= rel_tol * abs(val):
            return val
        prev = val
        n *= 2
    return prev


def _tail_nonneg(alpha: float, zeta: float) -> float:
    # integral over [zeta, 1], zeta in [0, 1)
    k = max(1, math.ceil(2.0 * (alpha + 1.0)))
    p = k / (alpha + 1.0)
    v_max = (1.0 - zeta) ** (1.0 / p)

    def integrand(v):
        return p * v ** (k - 1) * (2.0 - v**p) ** alpha

    return gauss_legendre(integrand, 0.0, v_max)


def power_tail_integral(alpha: float, zeta: float) -> float:
    """Integral of (1 - t^2)^alpha over [zeta, 1] for alpha > -1, -1 <= zeta <= 1."""
    if not alpha > -1.0:
        raise ValueError(f"alpha must exceed -1, got {alpha}")
    if not -1.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must lie in [-1, 1], got {zeta}")
    if zeta == 1.0:
        return 0.0
    if zeta >= 0.0:
        return _tail_nonneg(alpha, zeta)
    full = _tail_nonneg(alpha, 0.0)
    return 2.0 * full - _tail_nonneg(alpha, -zeta)


def power_integral(alpha: float, a: float, b: float) -> float:
    """Integral of (1 - t^2)^alpha over [a, b] inside (-1, 1), for alpha >= 0.

    Used for short interior intervals where differencing two tails would lose
    digits; the integrand is bounded there so plain Gauss-Legendre suffices.
    """
    if a == b:
        return 0.0
    return gauss_legendre(lambda t: np.clip(1.0 - t * t, 0.0, None) ** alpha, a, b)
