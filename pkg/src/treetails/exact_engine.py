"""Exact finite-n ground truth.

* :func:`enumerate_bary` / :func:`enumerate_linear` expand every history of
  the growth process (probabilities as exact fractions, identical states
  merged) and read off the joint law of path length, Wiener index and the
  sorted root split.
* :func:`split_marginal` gives the law of one root-subtree size through the
  Polya urn PU(b).
* :func:`expectations` tabulates ``E[P_n]`` and ``E[W_n]`` in O(n_max^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Hashable, Iterator, Union

import numpy as np

from .tree_models import WeightSampler

Prob = Union[Fraction, float]

STATE_BUDGET = 2_000_000


@dataclass
class Pmf:
    """Finite distribution ``value -> probability``."""

    probs: dict = field(default_factory=dict)

    @classmethod
    def point(cls, value) -> "Pmf":
        return cls({value: Fraction(1)})

    @classmethod
    def from_samples(cls, values) -> "Pmf":
        vals, counts = np.unique(np.asarray(values), return_counts=True, axis=0)
        total = counts.sum()
        keys = [tuple(v) if np.ndim(v) else v.item() for v in vals]
        return cls({k: c / total for k, c in zip(keys, counts.tolist())})

    def total(self) -> Prob:
        return sum(self.probs.values())

    def map(self, fn: Callable[[Hashable], Hashable]) -> "Pmf":
        out: dict = {}
        for k, p in self.probs.items():
            key = fn(k)
            out[key] = out.get(key, 0) + p
        return Pmf(out)

    def expect(self, fn: Callable[[Hashable], float] = lambda x: x) -> Prob:
        return sum(p * fn(k) for k, p in self.probs.items())

    def __getitem__(self, key) -> Prob:
        return self.probs.get(key, 0)

    def support(self) -> list:
        return sorted(self.probs)

    def tv_distance(self, other: "Pmf") -> float:
        keys = set(self.probs) | set(other.probs)
        return 0.5 * sum(abs(float(self[k]) - float(other[k])) for k in keys)

    def exact_equal(self, other: "Pmf") -> bool:
        keys = set(self.probs) | set(other.probs)
        return all(self[k] == other[k] for k in keys)

    def to_json(self) -> list:
        def enc(v):
            if isinstance(v, tuple):
                return [enc(x) for x in v]
            if isinstance(v, Fraction):
                return int(v) if v.denominator == 1 else float(v)
            return v
        return [{"value": enc(k), "prob": float(p), "exact": str(p)} for k, p in sorted(self.probs.items())]


# -- enumeration of the b-ary growth process ---------------------------------
# A node is (z, children): z is the realised weight vector (None until the
# node receives its first child), children a b-tuple of nodes or None.

def _expand_bary(node, support) -> Iterator[tuple[tuple, Fraction]]:
    z, kids = node
    for j, child in enumerate(kids):
        if child is None:
            leaf = (None, (None,) * len(kids))
            new_kids = kids[:j] + (leaf,) + kids[j + 1:]
            if z is None:
                for zv, pz in support:
                    yield (zv, new_kids), pz
            else:
                yield (z, new_kids), Fraction(1)
        else:
            for new_child, p in _expand_bary(child, support):
                yield (z, kids[:j] + (new_child,) + kids[j + 1:]), p


def _flatten_bary(root) -> tuple[list[int], list[Fraction], list[int]]:
    """Parent list, edge weights and root-child sizes by slot."""
    parent, weight = [-1], [Fraction(0)]
    stack = [(root, 0)]
    while stack:
        (z, kids), idx = stack.pop()
        for j, child in enumerate(kids):
            if child is not None:
                parent.append(idx)
                weight.append(z[j])
                stack.append((child, len(parent) - 1))
    split = [_count(child) for child in root[1]]
    return parent, weight, split


def _count(node) -> int:
    if node is None:
        return 0
    return 1 + sum(_count(c) for c in node[1])


def _pair_functionals(parent: list[int], weight: list) -> tuple:
    """Path length and Wiener index from explicit depths and lowest common ancestors."""
    n = len(parent)
    # children are appended after their parents, so one pass yields depths
    depth = [Fraction(0)] * n
    anc: list[list[int]] = [[0]] + [[] for _ in range(n - 1)]
    for k in range(1, n):
        depth[k] = depth[parent[k]] + weight[k]
        anc[k] = anc[parent[k]] + [k]
    p = sum(depth, Fraction(0))
    w = Fraction(0)
    for u in range(n):
        for v in range(u + 1, n):
            common = 0
            for a, c in zip(anc[u], anc[v]):
                if a != c:
                    break
                common = a
            w += depth[u] + depth[v] - 2 * depth[common]
    return p, w


def _num(x: Fraction):
    return int(x) if x.denominator == 1 else x


@dataclass
class BaryEnumeration:
    n: int
    b: int
    joint: Pmf  # (P, W, sorted split) -> probability

    @property
    def functionals(self) -> Pmf:
        return self.joint.map(lambda k: (k[0], k[1]))

    @property
    def path_length(self) -> Pmf:
        return self.joint.map(lambda k: k[0])

    @property
    def wiener(self) -> Pmf:
        return self.joint.map(lambda k: k[1])

    @property
    def sorted_split(self) -> Pmf:
        return self.joint.map(lambda k: k[2])


def enumerate_bary(n: int, b: int, sampler: WeightSampler | None = None) -> BaryEnumeration:
    """Exact law of ``(P_n, W_n, sorted I_n)`` by expanding every external-node choice."""
    if n < 1:
        raise ValueError("n must be >= 1")
    sampler = sampler or WeightSampler.unit(b)
    if sampler.b != b:
        raise ValueError("sampler arity does not match b")
    support = sampler.support()
    states = {(None, (None,) * b): Fraction(1)}
    for k in range(1, n):
        externals = k * (b - 1) + 1
        nxt: dict = {}
        for state, p in states.items():
            for new, pz in _expand_bary(state, support):
                nxt[new] = nxt.get(new, 0) + p * pz / externals
        states = nxt
        if len(states) > STATE_BUDGET:
            raise ValueError(f"enumeration exceeds {STATE_BUDGET} states at size {k + 1}")
    joint: dict = {}
    for state, p in states.items():
        parent, weight, split = _flatten_bary(state)
        pl, wi = _pair_functionals(parent, weight)
        key = (_num(pl), _num(wi), tuple(sorted(split, reverse=True)))
        joint[key] = joint.get(key, 0) + p
    return BaryEnumeration(n, b, Pmf(joint))


# -- enumeration of the linear recursive tree ---------------------------------
# A node is the sorted tuple of its children (isomorphic states are merged;
# the attachment rule only sees outdegrees).

def _expand_linear(node, beta) -> Iterator[tuple[tuple, Fraction]]:
    yield tuple(sorted(node + ((),))), 1 + beta * len(node)
    for i, child in enumerate(node):
        for new_child, w in _expand_linear(child, beta):
            yield tuple(sorted(node[:i] + (new_child,) + node[i + 1:])), w


def _flatten_linear(root) -> list[int]:
    parent = [-1]
    stack = [(root, 0)]
    while stack:
        node, idx = stack.pop()
        for child in node:
            parent.append(idx)
            stack.append((child, len(parent) - 1))
    return parent


def enumerate_linear(n: int, beta) -> Pmf:
    """Exact law of ``(P_n, W_n)`` for the linear recursive tree with parameter ``beta``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    beta = Fraction(beta)
    states = {(): Fraction(1)}
    for k in range(1, n):
        total = k + beta * (k - 1)
        nxt: dict = {}
        for state, p in states.items():
            for new, w in _expand_linear(state, beta):
                nxt[new] = nxt.get(new, 0) + p * w / total
        states = nxt
    out: dict = {}
    for state, p in states.items():
        parent = _flatten_linear(state)
        pl, wi = _pair_functionals(parent, [Fraction(0)] + [Fraction(1)] * (len(parent) - 1))
        key = (_num(pl), _num(wi))
        out[key] = out.get(key, 0) + p
    return Pmf(out)


# -- urn marginals and expectations ------------------------------------------

def split_marginal(n: int, b: int, exact: bool = True) -> Pmf:
    """Law of ``I_{n,1}``: draws of one colour among the first ``n - 1`` draws of PU(b).

    PU(b) starts with one ball per colour and returns the drawn ball with
    ``b - 1`` more of its colour.
    """
    if n < 1 or b < 2:
        raise ValueError("need n >= 1 and b >= 2")
    one = Fraction(1) if exact else 1.0
    pmf = [one]
    for m in range(n - 1):
        den = b + m * (b - 1)
        new = [0 * one] * (m + 2)
        for k, p in enumerate(pmf):
            up = (1 + k * (b - 1)) * one / den
            new[k + 1] += p * up
            new[k] += p * (1 - up)
        pmf = new
    return Pmf({k: p for k, p in enumerate(pmf) if p})


def split_marginals(n_max: int, b: int) -> Iterator[np.ndarray]:
    """Float arrays ``pmf_n`` over ``{0..n-1}`` for ``n = 1..n_max``, same recursion as
    :func:`split_marginal`."""
    pmf = np.ones(1)
    yield pmf
    for m in range(n_max - 1):
        den = b + m * (b - 1.0)
        k = np.arange(m + 1)
        up = (1.0 + k * (b - 1.0)) / den
        new = np.zeros(m + 2)
        new[1:] += pmf * up
        new[:-1] += pmf * (1.0 - up)
        pmf = new
        yield pmf


@dataclass(frozen=True)
class ExpectationTable:
    """``ep[n] = E[P_n]`` and ``ew[n] = E[W_n]`` for ``0 <= n <= n_max`` (size 0 maps to 0)."""

    b: int
    mu: float
    ep: np.ndarray
    ew: np.ndarray

    @property
    def n_max(self) -> int:
        return len(self.ep) - 1

    def covers(self, n: int) -> bool:
        return n <= self.n_max

    def rows(self):
        for n in range(1, self.n_max + 1):
            yield n, float(self.ep[n]), float(self.ew[n])


def expectations(n_max: int, b: int, mu: float = 1.0) -> ExpectationTable:
    """Expectation recursion from the root decomposition::

        E[P_n] = b sum_k pmf(k) E[P_k] + mu (n - 1)
        E[W_n] = b sum_k pmf(k) (E[W_k] + (n - k) E[P_k]) + mu b sum_k pmf(k) k (n - k)
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    ep = np.zeros(n_max + 1)
    ew = np.zeros(n_max + 1)
    for n, pmf in enumerate(split_marginals(n_max, b), start=1):
        if n == 1:
            continue
        k = np.arange(n)
        ep[n] = b * pmf.dot(ep[:n]) + mu * (n - 1)
        ew[n] = b * pmf.dot(ew[:n] + (n - k) * ep[:n]) + mu * b * pmf.dot(k * (n - k))
    return ExpectationTable(b, mu, ep, ew)


def expectations_exact(n_max: int, b: int, mu=1) -> tuple[list[Fraction], list[Fraction]]:
    """Rational version of :func:`expectations` for small ``n_max``."""
    mu = Fraction(mu)
    ep = [Fraction(0)] * (n_max + 1)
    ew = [Fraction(0)] * (n_max + 1)
    for n in range(2, n_max + 1):
        pmf = split_marginal(n, b)
        ep[n] = b * sum(p * ep[k] for k, p in pmf.probs.items()) + mu * (n - 1)
        ew[n] = (b * sum(p * (ew[k] + (n - k) * ep[k]) for k, p in pmf.probs.items())
                 + mu * b * sum(p * k * (n - k) for k, p in pmf.probs.items()))
    return ep, ew


def bst_mean_path_length(n: int) -> float:
    """Closed form ``2(n+1)H_n - 4n`` for the random binary search tree."""
    h = math.fsum(1.0 / k for k in range(1, n + 1))
    return 2.0 * (n + 1) * h - 4.0 * n
