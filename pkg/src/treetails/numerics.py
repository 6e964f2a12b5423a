"""Transcendental constants and numeric certificates for the Laplace-transform bounds.

Two constants drive every tail bound in this package:

* ``gamma`` -- the positive root of ``exp(2/g) - 2/g = 12/7`` (about 2.0047)
* ``l0``    -- the largest root of ``exp(L) = 6 L**2`` (about 5.0177)

Both are found by bisection on fixed brackets. The remaining helpers evaluate
the inequalities used when bounding ``E[exp(<s, X_n>)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

GAMMA_BRACKET = (1.5, 2.5)
L0_BRACKET = (4.0, 6.0)
TWELVE_SEVENTHS = 12.0 / 7.0

# Default asks for the float floor; the continuity of the piecewise bound at
# 4*D*exp(l0) depends on exp(l0) = 6*l0**2 holding to ~1e-13 relative.
DEFAULT_TOLERANCE = 1e-15


def gamma_equation(g: float) -> float:
    """``exp(2/g) - 2/g - 12/7``; decreasing in ``g`` for ``g > 0``."""
    x = 2.0 / g
    return math.exp(x) - x - TWELVE_SEVENTHS


def l0_equation(x: float) -> float:
    """``exp(L) - 6 L**2``."""
    return math.exp(x) - 6.0 * x * x


def _check_bracket(fn: Callable[[float], float], lo: float, hi: float, points: int = 257) -> int:
    """Sign scan over ``[lo, hi]``: exactly one sign change, returns sign at ``lo``."""
    step = (hi - lo) / (points - 1)
    signs = [math.copysign(1.0, fn(lo + k * step)) for k in range(points)]
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if changes != 1:
        raise ArithmeticError(f"bracket [{lo}, {hi}] has {changes} sign changes, expected 1")
    return int(signs[0])


def _bisect(fn: Callable[[float], float], lo: float, hi: float,
            done: Callable[[float, float], bool]) -> float:
    sign_lo = _check_bracket(fn, lo, hi)
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket exhausted at double precision
            return lo if abs(fn(lo)) <= abs(fn(hi)) else hi
        value = fn(mid)
        if value == 0.0 or done(mid, value):
            return mid
        if math.copysign(1.0, value) == sign_lo:
            lo = mid
        else:
            hi = mid


def solve_gamma(tolerance: float = DEFAULT_TOLERANCE) -> float:
    """Root of ``exp(2/g) - 2/g = 12/7`` with absolute residual at most ``tolerance``.

    The residual target is met unless it lies below the double-precision
    floor, in which case the best representable bisection point is returned.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    return _bisect(gamma_equation, *GAMMA_BRACKET, done=lambda x, v: abs(v) <= tolerance)


def solve_l0(tolerance: float = DEFAULT_TOLERANCE) -> float:
    """Largest root of ``exp(L) = 6 L**2``; residual is measured relative to ``exp(L)``.

    ``exp(L) - 6L^2`` has roots near -0.344, 0.533 and 5.018. The bracket
    ``[4, 6]`` isolates the largest one.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    return _bisect(l0_equation, *L0_BRACKET, done=lambda x, v: abs(v) <= tolerance * math.exp(x))


@dataclass(frozen=True)
class Constants:
    gamma: float
    l0: float
    tolerance: float

    @property
    def gamma_residual(self) -> float:
        return abs(gamma_equation(self.gamma))

    @property
    def l0_residual(self) -> float:
        """Relative residual ``|exp(l0) - 6 l0^2| / exp(l0)``."""
        return abs(l0_equation(self.l0)) / math.exp(self.l0)

    def as_dict(self) -> dict[str, float]:
        return {
            "gamma": self.gamma,
            "l0": self.l0,
            "gamma_residual": self.gamma_residual,
            "l0_residual": self.l0_residual,
        }


@lru_cache(maxsize=8)
def constants(tolerance: float = DEFAULT_TOLERANCE) -> Constants:
    return Constants(solve_gamma(tolerance), solve_l0(tolerance), tolerance)


def _simpson_adaptive(fn: Callable[[float], float], a: float, b: float, eps: float,
                      whole: float, fa: float, fm: float, fb: float, depth: int) -> float:
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = fn(lm), fn(rm)
    left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * eps:
        return left + right + delta / 15.0
    return (_simpson_adaptive(fn, a, m, 0.5 * eps, left, fa, flm, fm, depth - 1)
            + _simpson_adaptive(fn, m, b, 0.5 * eps, right, fm, frm, fb, depth - 1))


def integrate(fn: Callable[[float], float], a: float, b: float, eps: float = 1e-12,
              max_depth: int = 60) -> float:
    """Adaptive Simpson quadrature with absolute error target ``eps``."""
    fa, fb, fm = fn(a), fn(b), fn(0.5 * (a + b))
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    return _simpson_adaptive(fn, a, b, eps, whole, fa, fm, fb, max_depth)


def exp_neg_quadratic_mean(c: float) -> float:
    """``E[exp(-c U (1 - U))]`` for uniform ``U``, i.e. the integral over [0, 1]."""
    if c < 0:
        raise ValueError("c must be nonnegative")
    if c == 0:
        return 1.0
    # symmetric about 1/2
    half = integrate(lambda u: math.exp(-c * u * (1.0 - u)), 0.0, 0.5, eps=5e-13)
    return 2.0 * half


def fill_janson_rhs(k: float, s_norm: float) -> float:
    """``(1 - exp(-k s^2 / 2)) / (k s^2 / 2)``; upper bound for ``E[exp(-2 k s^2 U(1-U))]``."""
    a = 0.5 * k * s_norm * s_norm
    if a == 0:
        return 1.0
    return -math.expm1(-a) / a


def fill_janson_k(m: float, l0: float) -> float:
    """The constant ``K_M``: 12 up to ``l0``, ``2 e^M / M^2`` beyond."""
    return 12.0 if m <= l0 else 2.0 * math.exp(m) / (m * m)


def fill_janson_large_s_lhs(lam: float, k_m: float) -> float:
    """``e^|lam| (1 - exp(-k_m lam^2/2)) / (k_m lam^2/2)``, which must stay below 1."""
    return math.exp(abs(lam)) * fill_janson_rhs(k_m, lam)


def small_s_certificate(s_norm: float, d_bound: float, gamma: float | None = None) -> float:
    """Biquadratic whose nonpositivity certifies the small-``s`` Laplace bound.

    Evaluated after substituting ``K = 5/2 D^2 gamma^2`` and
    ``exp(2/gamma) - 1 - 2/gamma = 5/7``; it vanishes at ``s = 1/(gamma D)``.
    """
    if s_norm < 0:
        raise ValueError("s_norm must be nonnegative")
    if gamma is None:
        gamma = constants().gamma
    y = (d_bound * gamma * s_norm) ** 2
    inner = 5.0 / 7.0 - 5.0 / 6.0 + (5.0 / 12.0 - 25.0 / 42.0) * y + (25.0 / 84.0) * y * y
    return d_bound * d_bound * gamma * gamma * inner
