"""Closed-form tail bounds: the five-piece Chernoff bound, its Laplace envelope,
asymptotic reference curves and lower-tail formulas.

All probabilities are also available in log form. The far pieces of the bound
underflow double precision long before ``t = 1e5 D``; comparisons between
pieces, and monotonicity checks, are made on the exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

from .numerics import Constants, constants

PIECE_FORMULAS = (
    "exp(-t^2/(10 gamma^2 D^2))",
    "exp(5/2 - t/(gamma D))",
    "exp(-t^2/(96 D^2))",
    "exp(24 l0^2 - l0 t/D)",
    "exp(t/D - (t/D) log(t/(4D)))",
)


@dataclass(frozen=True)
class PiecewiseBound:
    """Upper bound on ``P(X_{n,j} > t)`` (and the left tail) for toll bound ``D``."""

    d_bound: float
    constants: Constants = field(default_factory=constants)

    def __post_init__(self):
        if not (self.d_bound > 0 and math.isfinite(self.d_bound)):
            raise ValueError(f"d_bound must be positive and finite, got {self.d_bound}")

    @property
    def c_threshold(self) -> float:
        g, d = self.constants.gamma, self.d_bound
        return 48.0 * d / g + d * math.sqrt(48.0 * (48.0 / (g * g) - 5.0))

    @property
    def breakpoints(self) -> tuple[float, float, float, float]:
        g, l0, d = self.constants.gamma, self.constants.l0, self.d_bound
        return (5.0 * g * d, self.c_threshold, 48.0 * d * l0, 4.0 * d * math.exp(l0))

    def piece(self, t: float) -> int:
        """Index 0..4 of the active piece; intervals are closed on the right."""
        for k, bp in enumerate(self.breakpoints):
            if t <= bp:
                return k
        return 4

    def piece_exponent(self, k: int, t: float) -> float:
        """Log of piece ``k`` evaluated at ``t``, regardless of whether it is active."""
        g, l0, d = self.constants.gamma, self.constants.l0, self.d_bound
        if k == 0:
            return -t * t / (10.0 * g * g * d * d)
        if k == 1:
            return 2.5 - t / (g * d)
        if k == 2:
            return -t * t / (96.0 * d * d)
        if k == 3:
            return 24.0 * l0 * l0 - l0 * t / d
        if k == 4:
            r = t / d
            return r - r * math.log(t / (4.0 * d))
        raise IndexError(k)

    def log_value(self, t: float) -> float:
        if t < 0:
            raise ValueError("t must be nonnegative")
        return min(0.0, self.piece_exponent(self.piece(t), t))

    def value(self, t: float) -> float:
        return math.exp(self.log_value(t))

    def table(self) -> dict:
        """Breakpoints and per-piece formulas, for JSON output."""
        edges = (0.0, *self.breakpoints, math.inf)
        return {
            "d_bound": self.d_bound,
            "gamma": self.constants.gamma,
            "l0": self.constants.l0,
            "c_threshold": self.c_threshold,
            "breakpoints": list(self.breakpoints),
            "pieces": [
                {"index": k, "t_low": edges[k], "t_high": edges[k + 1], "formula": PIECE_FORMULAS[k]}
                for k in range(5)
            ],
        }


def upper_tail(t: float, bound: PiecewiseBound) -> float:
    """Bound on ``P(X_{n,j} > t)``; equals 1 at ``t = 0``."""
    return bound.value(t)


def log_upper_tail(t: float, bound: PiecewiseBound) -> float:
    return bound.log_value(t)


def laplace_envelope_exponent(s_norm: float, bound: PiecewiseBound) -> float:
    if s_norm < 0:
        raise ValueError("s_norm must be nonnegative")
    g, l0, d = bound.constants.gamma, bound.constants.l0, bound.d_bound
    if s_norm <= 1.0 / (g * d):
        return 2.5 * g * g * d * d * s_norm * s_norm
    if s_norm <= l0 / d:
        return 24.0 * d * d * s_norm * s_norm
    return 4.0 * math.exp(d * s_norm)


def laplace_envelope(s_norm: float, bound: PiecewiseBound) -> float:
    """Upper bound on ``E[exp(<s, X_n>)]`` as a function of ``|s|``.

    The envelope jumps upward at ``|s| = 1/(gamma D)``; the value there is the
    left (small-``s``) piece.
    """
    return math.exp(laplace_envelope_exponent(s_norm, bound))


Regime = Literal["small", "mid", "large"]


@dataclass(frozen=True)
class ChernoffSolution:
    u_star: float
    exponent: float
    regime: Regime

    @property
    def probability(self) -> float:
        return math.exp(self.exponent)


def chernoff_k(u: float, bound: PiecewiseBound) -> tuple[float, Regime]:
    """The Laplace-envelope coefficient ``K_u`` with ``E[e^{u X}] <= exp(K_u u^2)``."""
    g, l0, d = bound.constants.gamma, bound.constants.l0, bound.d_bound
    if u <= 1.0 / (g * d):
        return 2.5 * g * g * d * d, "small"
    if u <= l0 / d:
        return 24.0 * d * d, "mid"
    return 4.0 * math.exp(d * u) / (u * u), "large"


def chernoff_objective(u: float, t: float, bound: PiecewiseBound) -> float:
    k, _ = chernoff_k(u, bound)
    return k * u * u - u * t


def chernoff_optimize(t: float, bound: PiecewiseBound) -> ChernoffSolution:
    """Minimiser of ``K_u u^2 - u t`` following the five-range case table.

    Ranges are ``[a, b)`` here, matching the minimisation table; the exponent
    is continuous across them, so this agrees with :func:`upper_tail`.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    g, l0, d = bound.constants.gamma, bound.constants.l0, bound.d_bound
    b1, b2, b3, b4 = bound.breakpoints
    if t < b1:
        return ChernoffSolution(t / (5.0 * d * d * g * g), -t * t / (10.0 * g * g * d * d), "small")
    if t < b2:
        return ChernoffSolution(1.0 / (g * d), 2.5 - t / (g * d), "small")
    if t < b3:
        return ChernoffSolution(t / (48.0 * d * d), -t * t / (96.0 * d * d), "mid")
    if t < b4:
        return ChernoffSolution(l0 / d, 24.0 * l0 * l0 - l0 * t / d, "mid")
    u = math.log(t / (4.0 * d)) / d
    return ChernoffSolution(u, t / d - (t / d) * math.log(t / (4.0 * d)), "large")


def chernoff_candidates(t: float, bound: PiecewiseBound) -> list[tuple[float, float]]:
    """All (u, objective) candidates from the proof: interior minimisers clipped
    into their regime, plus the regime boundaries."""
    g, l0, d = bound.constants.gamma, bound.constants.l0, bound.d_bound
    u_small = min(t / (5.0 * d * d * g * g), 1.0 / (g * d))
    u_mid = min(max(t / (48.0 * d * d), 1.0 / (g * d)), l0 / d)
    u_large = max(math.log(t / (4.0 * d)) / d, l0 / d) if t > 0 else l0 / d
    out = []
    for u, k in ((u_small, 2.5 * g * g * d * d), (1.0 / (g * d), 2.5 * g * g * d * d),
                 (u_mid, 24.0 * d * d), (l0 / d, 24.0 * d * d),
                 (u_large, 4.0 * math.exp(d * u_large) / (u_large * u_large))):
        out.append((u, k * u * u - u * t))
    return out


@dataclass(frozen=True)
class AsymptoticBound:
    """Parameters of the large-``n`` reference curves (the o(1) terms set to 0)."""

    b: int
    mu: float
    d_bound: float

    def __post_init__(self):
        if self.b < 2:
            raise ValueError("b must be at least 2")
        if self.mu < 0 or not self.d_bound > 0:
            raise ValueError("need mu >= 0 and d_bound > 0")

    def alpha(self, kind: str = "path_length") -> float:
        b, d = self.b, self.d_bound
        if kind == "linear":
            return -math.log(4.0 * d * (b - 1) * math.e)
        return math.log(b * self.mu / (4.0 * d * (b - 1) * math.e))

    def prefactor(self, kind: str = "path_length") -> float:
        if kind == "linear":
            return 1.0 / ((self.b - 1) * self.d_bound)
        return self.b / (self.b - 1) * self.mu / self.d_bound


AsymptoticKind = Literal["path_length", "wiener", "linear"]


def asymptotic_exponent(t: float, n: int, params: AsymptoticBound, kind: AsymptoticKind) -> float:
    if n < 3:
        raise ValueError("n must be at least 3")
    if not t > 0:
        raise ValueError("t must be positive")
    if kind not in ("path_length", "wiener", "linear"):
        raise ValueError(f"unknown kind {kind!r}")
    logn = math.log(n)
    return -params.prefactor(kind) * t * logn * (math.log(logn) + math.log(t) + params.alpha(kind))


def asymptotic_upper(t: float, n: int, params: AsymptoticBound, kind: AsymptoticKind) -> float:
    """Asymptotic reference curve for ``P(|Y - E Y| > t E Y)``, clamped at 1.

    Not a finite-``n`` bound: the vanishing correction is dropped.
    """
    return math.exp(min(0.0, asymptotic_exponent(t, n, params, kind)))


LOWER_TAIL_CAVEAT_N = 3814280  # ceil(e^(e^e)): smallest n with log log log n > 1


def lower_tail_wiener(t: float, n: int, b: int, mu: float = 1.0,
                      kind: Literal["bary", "linear"] = "bary") -> tuple[float, bool]:
    """Main term of the Wiener-index lower tail bound.

    Returns ``(value, caveat)``; ``caveat`` is True for ``n < e^(e^e)``, where
    ``log log log n < 1`` and the dropped ``O(log log log n)`` term is not yet
    separated from constants.
    """
    if b < 2:
        raise ValueError("b must be at least 2")
    if n < 3:
        raise ValueError("n must be at least 3")
    if t < 0:
        raise ValueError("t must be nonnegative")
    caveat = n < LOWER_TAIL_CAVEAT_N
    if t == 0:
        return 1.0, caveat
    logn = math.log(n)
    pre = 4.0 * b / (b - 1) * mu if kind == "bary" else 4.0 / (b - 1)
    exponent = -pre * t * logn * math.log(logn)
    return math.exp(min(0.0, exponent)), caveat
