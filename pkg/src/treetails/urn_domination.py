"""Polya urns, the sorted-count Markov kernels, their monotone coupling, and the
exact check that ``sum_i f(I_{n,i}/n)`` is stochastically below ``1 - U(1-U)``.

PU(b): b colours, one ball each at the start; a drawn ball goes back with
``b - 1`` more of its colour. The drawing counts after ``n - 1`` draws have the
law of the root-subtree sizes of a b-ary recursive tree of size ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional

import numpy as np

from . import _kernels
from .exact_engine import Pmf
from .recursion_core import f
from .rng import TAG_COUPLE, TAG_URN, shard_blocks, stream
from .tree_models import _run_shards

DP_STATE_BUDGET = 10_000_000
CDF_SLACK = 1e-12  # float rounding in summed probabilities


@dataclass(frozen=True)
class UrnState:
    counts: tuple[int, ...]

    @property
    def n(self) -> int:
        return sum(self.counts)

    def sorted(self) -> tuple[int, ...]:
        return tuple(sorted(self.counts, reverse=True))


def urn_step(state: UrnState, b: int, rng: np.random.Generator) -> UrnState:
    """One draw from PU(b): colour ``j`` with probability ``(1 + c_j (b-1)) / (b + n (b-1))``."""
    if len(state.counts) != b:
        raise ValueError("state has wrong number of colours")
    weights = np.array([1 + c * (b - 1) for c in state.counts], dtype=float)
    j = int(rng.choice(b, p=weights / weights.sum()))
    counts = list(state.counts)
    counts[j] += 1
    return UrnState(tuple(counts))


def _check_sorted(x) -> tuple[int, ...]:
    x = tuple(int(v) for v in x)
    if any(a < b for a, b in zip(x, x[1:])) or (x and x[-1] < 0):
        raise ValueError(f"state {x} is not sorted nonincreasing and nonnegative")
    return x


def alpha(x) -> list[int]:
    """Block multiplicities: size of the block of equal entries at its first index, else 0."""
    x = _check_sorted(x)
    out = []
    for j, v in enumerate(x):
        first = j == 0 or x[j - 1] > v
        out.append(sum(1 for w in x if w == v) if first else 0)
    return out


def _bump(x, j):
    return x[:j] + (x[j] + 1,) + x[j + 1:]


def kernel_pu(x, n: int, b: int) -> dict:
    """``K_n(x, .)`` for the sorted counts of PU(b) after ``n`` draws (``sum(x) == n``)."""
    x = _check_sorted(x)
    if len(x) != b:
        raise ValueError("state length must equal b")
    den = b + n * (b - 1)
    return {_bump(x, j): Fraction(a * (1 + x[j] * (b - 1)), den)
            for j, a in enumerate(alpha(x)) if a}


def kernel_prime(x, n: int, b: int) -> dict:
    """Displayed ``K'_n(x, .)`` for the top-b sorted counts of PU(b+1).

    Drawing the hidden (b+1)-th colour is a stay with probability
    ``(1 + (n - sum x) b) / (b + 1 + n b)``.
    """
    x = _check_sorted(x)
    if len(x) != b or sum(x) > n:
        raise ValueError("need len(x) == b and sum(x) <= n")
    den = b + 1 + n * b
    out = {_bump(x, j): Fraction(a * (1 + x[j] * b), den) for j, a in enumerate(alpha(x)) if a}
    stay = Fraction(1 + (n - sum(x)) * b, den)
    out[x] = out.get(x, 0) + stay
    return out


def kernel_prime_urn(x, n: int, b: int) -> dict:
    """Transition of the top-b sorted counts of an actual PU(b+1).

    Differs from :func:`kernel_prime` only when the hidden count equals
    ``x[-1]``: drawing it then raises the top-b vector instead of staying.
    """
    x = _check_sorted(x)
    hidden = n - sum(x)
    if len(x) != b or hidden < 0 or hidden > x[-1]:
        raise ValueError(f"{x} at n={n} is not a top-{b} state of PU({b + 1})")
    full = x + (hidden,)
    den = b + 1 + n * b
    out: dict = {}
    for j, c in enumerate(full):
        nxt = tuple(sorted(full[:j] + (c + 1,) + full[j + 1:], reverse=True))[:b]
        out[nxt] = out.get(nxt, 0) + Fraction(1 + c * b, den)
    return out


@dataclass(frozen=True)
class KernelPair:
    k: dict
    k_prime: dict
    k_prime_urn: Optional[dict] = None


def kernels(x, n: int, b: int) -> KernelPair:
    """``K_n(x, .)``, displayed ``K'_n(x, .)`` and, where ``x`` is a valid
    PU(b+1) state, the tie-corrected urn kernel."""
    x = _check_sorted(x)
    try:
        urn = kernel_prime_urn(x, n, b)
    except ValueError:
        urn = None
    return KernelPair(kernel_pu(x, n, b), kernel_prime(x, n, b), urn)


def _leq(a, c) -> bool:
    return all(u <= v for u, v in zip(a, c))


def stochastically_dominated(p: dict, q: dict) -> bool:
    """``p <=_st q`` for the componentwise order, by checking every up-set
    generated by a subset of ``supp(p)``."""
    pts = [s for s, w in p.items() if w > 0]
    q_pts = list(q.items())
    for r in range(1, len(pts) + 1):
        for gens in combinations(pts, r):
            mass_p = sum(w for s, w in p.items() if any(_leq(g, s) for g in gens))
            mass_q = sum(w for s, w in q_pts if any(_leq(g, s) for g in gens))
            if mass_p > mass_q:
                return False
    return True


def sorted_states(total: int, b: int) -> list[tuple[int, ...]]:
    """All nonincreasing b-tuples of nonnegative integers summing to ``total``."""
    out = []

    def rec(prefix, left, cap, slots):
        if slots == 1:
            if left <= cap:
                out.append(prefix + (left,))
            return
        for v in range(min(left, cap), -1, -1):
            if v * slots < left:
                break
            rec(prefix + (v,), left - v, v, slots - 1)
    rec((), total, total, b)
    return out


def _masks(points, gens) -> list[int]:
    out = []
    for s in points:
        m = 0
        for k, g in enumerate(gens):
            if _leq(g, s):
                m |= 1 << k
        out.append(m)
    return out


def _dominated_int(p: list, den_p: int, q: list, den_q: int) -> bool:
    """Integer-weight version of :func:`stochastically_dominated`."""
    gens = [s for s, _ in p]
    pm = list(zip(_masks(gens, gens), (w for _, w in p)))
    qm = list(zip(_masks([s for s, _ in q], gens), (w for _, w in q)))
    for subset in range(1, 1 << len(gens)):
        mp = sum(w for m, w in pm if m & subset)
        mq = sum(w for m, w in qm if m & subset)
        if mp * den_q > mq * den_p:
            return False
    return True


def _as_int(kernel: dict, den: int) -> list:
    out = []
    for s, w in kernel.items():
        num = w * den
        assert num.denominator == 1
        out.append((s, int(num)))
    return out


def kernel_domination_violations(n: int, b: int, urn_kernel: bool = False) -> list[tuple]:
    """Pairs ``(y, x)`` with ``y <= x`` at step ``n`` where ``K'_n(y, .)`` is not below ``K_n(x, .)``.

    ``x`` ranges over sorted states with sum ``n``; ``y`` over sorted states
    with sum at most ``n`` (and, for the urn kernel, a valid hidden count).
    """
    den_k = b + n * (b - 1)
    den_kp = b + 1 + n * b
    xs = [(x, _as_int(kernel_pu(x, n, b), den_k)) for x in sorted_states(n, b)]
    ys = []
    for s in range(n + 1):
        for y in sorted_states(s, b):
            if urn_kernel:
                if n - s > y[-1]:
                    continue
                ys.append((y, _as_int(kernel_prime_urn(y, n, b), den_kp)))
            else:
                ys.append((y, _as_int(kernel_prime(y, n, b), den_kp)))
    bad = []
    for x, kx in xs:
        for y, ky in ys:
            if _leq(y, x) and not _dominated_int(ky, den_kp, kx, den_k):
                bad.append((y, x))
    return bad


# -- coupling -----------------------------------------------------------------

@dataclass
class CoupledRun:
    j: np.ndarray  # (n+1, b) sorted PU(b) counts
    i: np.ndarray  # (n+1, b) chain driven by the displayed K'
    violations: int


def coupled_run(n: int, b: int, rng: np.random.Generator) -> CoupledRun:
    """One joint trajectory of length ``n`` with ``I <= J`` enforced by construction."""
    if n < 0:
        raise ValueError("n must be >= 0")
    u = rng.random((1, n))
    tj = np.zeros((1, n + 1, b), np.int64)
    ti = np.zeros((1, n + 1, b), np.int64)
    fj = np.zeros((1, b), np.int64)
    fi = np.zeros((1, b), np.int64)
    v = _kernels.coupled_urn_runs(n, b, u, tj, ti, True, fj, fi)
    if v:
        raise AssertionError(f"coupling ordering violated {v} times")
    return CoupledRun(tj[0], ti[0], int(v))


@dataclass
class CouplingSummary:
    n: int
    b: int
    runs: int
    violations: int
    final_j: np.ndarray
    final_i: np.ndarray


def coupled_runs(n: int, b: int, runs: int, seed: int, shards: int = 1) -> CouplingSummary:
    """Many coupled runs; counts ordering violations over every step of every run."""
    dummy = np.zeros((1, 1, b), np.int64)

    def work(k, rows):
        u = stream(seed, TAG_COUPLE, b, k).random((rows, n))
        fj = np.zeros((rows, b), np.int64)
        fi = np.zeros((rows, b), np.int64)
        v = _kernels.coupled_urn_runs(n, b, u, dummy, dummy, False, fj, fi)
        return v, fj, fi

    parts = _run_shards(work, shard_blocks(runs, shards), shards)
    violations = sum(int(v) for v, _, _ in parts)
    fj_all = [fj for _, fj, _ in parts]
    fi_all = [fi for _, _, fi in parts]
    return CouplingSummary(n, b, runs, int(violations), np.concatenate(fj_all), np.concatenate(fi_all))


def plain_urn_counts(draws: int, b: int, runs: int, seed: int) -> np.ndarray:
    """Sorted counts of independent PU(b) runs, simulated draw by draw."""
    g = stream(seed, TAG_URN, b, draws)
    counts = np.zeros((runs, b), np.int64)
    rows = np.arange(runs)
    for m in range(draws):
        w = 1.0 + counts * (b - 1.0)
        cum = np.cumsum(w, axis=1) / (b + m * (b - 1.0))
        j = (g.random((runs, 1)) >= cum).sum(axis=1)
        counts[rows, np.minimum(j, b - 1)] += 1
    return -np.sort(-counts, axis=1)


# -- exact domination ----------------------------------------------------------

class DominatingLaw:
    """Law of ``V = 1 - U(1-U)``: ``P(V <= v) = sqrt(4v - 3)`` on [3/4, 1]."""

    lower = 0.75
    upper = 1.0

    @staticmethod
    def cdf(v):
        v = np.asarray(v, dtype=float)
        return np.sqrt(np.clip(4.0 * v - 3.0, 0.0, 1.0))


def sorted_split_laws(n_max: int, b: int, exact: bool = False):
    """Yield ``(n, {sorted split: prob})`` for ``n = 1..n_max`` by a DP over sorted
    counts with the PU(b) kernel."""
    one = Fraction(1) if exact else 1.0
    states = {(0,) * b: one}
    yield 1, states
    for m in range(n_max - 1):
        den = b + m * (b - 1)
        nxt: dict = {}
        for x, p in states.items():
            prev = None
            for j, v in enumerate(x):
                if v == prev:
                    continue
                prev = v
                mult = x.count(v)
                y = x[:j] + (v + 1,) + x[j + 1:]
                nxt[y] = nxt.get(y, 0) + p * (mult * (1 + v * (b - 1)) * one / den)
        states = nxt
        if len(states) > DP_STATE_BUDGET:
            raise ValueError(f"sorted-state DP exceeds {DP_STATE_BUDGET} states")
        yield m + 2, states


def sorted_split_law(n: int, b: int, exact: bool = True) -> Pmf:
    for size, states in sorted_split_laws(n, b, exact):
        if size == n:
            return Pmf(dict(states))
    raise ValueError("n must be >= 1")


def s_law(n: int, states: dict) -> tuple[np.ndarray, np.ndarray]:
    """Atoms and probabilities of ``S_n = sum_i f(I_{n,i}/n)``, atoms sorted."""
    keys = np.array(list(states.keys()), dtype=float)
    probs = np.array([float(p) for p in states.values()])
    atoms = f(keys / n).sum(axis=1)
    order = np.argsort(atoms, kind="stable")
    return atoms[order], probs[order]


@dataclass
class DominationReport:
    n: int
    b: int
    states: int
    min_margin: float  # min over the grid of cdf_S(v) - cdf_V(v)
    first_violation: Optional[float] = None
    s_max: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.first_violation is None


def domination_grid(points: int = 10_000) -> np.ndarray:
    return np.linspace(0.0, 1.0, points)


def _check(n, b, states, grid) -> DominationReport:
    atoms, probs = s_law(n, states)
    cdf_s = np.concatenate([[0.0], np.cumsum(probs)])[np.searchsorted(atoms, grid, side="right")]
    margin = cdf_s - DominatingLaw.cdf(grid)
    bad = np.nonzero(margin < -CDF_SLACK)[0]
    return DominationReport(
        n=n, b=b, states=len(states), min_margin=float(margin.min()),
        first_violation=float(grid[bad[0]]) if len(bad) else None, s_max=float(atoms[-1]),
    )


def check_domination(n: int, b: int, grid_points: int = 10_000) -> DominationReport:
    """Exact law of ``S_n`` against ``cdf_V`` on a grid of [0, 1]."""
    if n < 1 or b < 2:
        raise ValueError("need n >= 1 and b >= 2")
    grid = domination_grid(grid_points)
    for size, states in sorted_split_laws(n, b):
        if size == n:
            return _check(n, b, states, grid)
    raise AssertionError("unreachable")


def check_domination_range(n_max: int, b: int, grid_points: int = 10_000) -> list[DominationReport]:
    """:func:`check_domination` for every ``n <= n_max`` in one DP sweep."""
    grid = domination_grid(grid_points)
    return [_check(size, b, states, grid) for size, states in sorted_split_laws(n_max, b)]


def bst_s_law(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Law of ``f(K/n) + f((n-1-K)/n)`` with ``K`` uniform on ``{0..n-1}``."""
    k = np.arange(n)
    atoms = f(k / n) + f((n - 1 - k) / n)
    order = np.argsort(atoms, kind="stable")
    return atoms[order], np.full(n, 1.0 / n)


# -- the analytic sum inequality ---------------------------------------------

def sum_inequality_check(x, y, slack: float = 1e-12) -> bool:
    """``sum_{i<=b+1} f(y_i) <= sum_{i<=b} f(x_i)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(y) != len(x) + 1:
        raise ValueError("y must have one more entry than x")
    return bool(f(y).sum() <= f(x).sum() + slack)


def random_sum_pair(b: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """A valid pair: ``y`` sorted on the simplex in R^{b+1}, ``x_i = y_i + a_i y_{b+1}``
    with ``a`` on the simplex in R^b, then ``x`` sorted."""
    y = np.sort(rng.dirichlet(np.ones(b + 1)))[::-1]
    a = rng.dirichlet(np.ones(b))
    x = np.sort(y[:b] + a * y[b])[::-1]
    return x, y
