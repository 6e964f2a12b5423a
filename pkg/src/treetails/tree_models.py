"""Random b-ary recursive trees with edge weights, and linear recursive trees."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from itertools import permutations
from typing import Optional

import numpy as np

from . import _kernels
from .rng import TAG_BARY, TAG_LINEAR, shard_blocks, stream


@dataclass(frozen=True)
class WeightSampler:
    """Law of the edge-weight vector ``Z = (Z_1, ..., Z_b)`` attached to every node.

    ``unit`` and ``const`` are deterministic (``const`` must have equal entries
    so that the components are identically distributed); ``perm`` is a uniform
    random permutation of ``values``.
    """

    kind: str
    values: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("unit", "const", "perm"):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if len(self.values) < 2:
            raise ValueError("need at least two weight components")
        if any(v < 0 or not math.isfinite(v) for v in self.values):
            raise ValueError("weights must be finite and nonnegative")
        if self.kind == "const" and len(set(self.values)) != 1:
            raise ValueError("const weights must have equal entries (identically distributed components)")
        if self.kind == "unit" and any(v != 1 for v in self.values):
            raise ValueError("unit weights are all ones")

    @classmethod
    def unit(cls, b: int) -> "WeightSampler":
        return cls("unit", (1.0,) * b)

    @classmethod
    def const(cls, values) -> "WeightSampler":
        return cls("const", tuple(float(v) for v in values))

    @classmethod
    def perm(cls, values) -> "WeightSampler":
        return cls("perm", tuple(float(v) for v in values))

    @classmethod
    def parse(cls, text: str, b: int) -> "WeightSampler":
        """Parse ``unit``, ``perm:1,0,0`` or ``const:2,2``."""
        text = text.strip()
        if text == "unit":
            return cls.unit(b)
        kind, _, rest = text.partition(":")
        if kind not in ("perm", "const") or not rest:
            raise ValueError(f"cannot parse weight spec {text!r}")
        values = tuple(float(v) for v in rest.split(","))
        if len(values) != b:
            raise ValueError(f"weight spec {text!r} has {len(values)} entries, expected b={b}")
        return cls(kind, values)

    def __str__(self) -> str:
        if self.kind == "unit":
            return "unit"
        return f"{self.kind}:" + ",".join(f"{v:g}" for v in self.values)

    @property
    def b(self) -> int:
        return len(self.values)

    @property
    def mu(self) -> float:
        """``E[Z_1]``."""
        return float(np.mean(self.values))

    @property
    def z_norm_bound(self) -> float:
        return math.sqrt(sum(v * v for v in self.values))

    @property
    def random(self) -> bool:
        return self.kind == "perm" and len(set(self.values)) > 1

    def support(self) -> list[tuple[tuple[Fraction, ...], Fraction]]:
        """Finite support of ``Z`` with exact probabilities."""
        vals = tuple(Fraction(v).limit_denominator(10**9) for v in self.values)
        if not self.random:
            return [(vals, Fraction(1))]
        counts: dict[tuple[Fraction, ...], int] = {}
        for p in permutations(vals):
            counts[p] = counts.get(p, 0) + 1
        total = math.factorial(len(vals))
        return [(z, Fraction(c, total)) for z, c in sorted(counts.items(), reverse=True)]


@dataclass(frozen=True, eq=False)
class WeightedTree:
    """Rooted tree on nodes ``0..n-1`` (node 0 is the root, labels in insertion order).

    ``edge_weight[k]`` is the weight of the edge from ``k`` to its parent
    (0 for the root). ``slot`` is the child position under the parent for
    b-ary trees and ``None`` for linear trees.
    """

    parent: np.ndarray
    edge_weight: np.ndarray
    slot: Optional[np.ndarray] = None
    b: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.parent)

    @property
    def is_bary(self) -> bool:
        return self.slot is not None

    def children(self) -> list[list[int]]:
        kids: list[list[int]] = [[] for _ in range(self.n)]
        for k in range(1, self.n):
            kids[int(self.parent[k])].append(k)
        return kids

    def validate(self) -> None:
        """Check the rooted-tree, recursive-labelling and slot invariants."""
        n = self.n
        if n < 1 or self.parent[0] != -1:
            raise ValueError("node 0 must be the root")
        for k in range(1, n):
            p = int(self.parent[k])
            if not 0 <= p < k:
                raise ValueError(f"node {k} has parent {p}: labels must increase away from the root")
        if np.any(self.edge_weight[1:] < 0):
            raise ValueError("negative edge weight")
        if self.is_bary:
            seen = set()
            for k in range(1, n):
                key = (int(self.parent[k]), int(self.slot[k]))
                if not 0 <= key[1] < self.b or key in seen:
                    raise ValueError(f"bad or duplicate slot {key}")
                seen.add(key)

    def subtree(self, root: int) -> "WeightedTree":
        """Copy of the subtree at ``root``, relabelled in increasing order."""
        kids = self.children()
        nodes = [root]
        for v in nodes:
            nodes.extend(kids[v])
        nodes.sort()
        index = {v: i for i, v in enumerate(nodes)}
        parent = np.array([-1] + [index[int(self.parent[v])] for v in nodes[1:]], dtype=np.int64)
        weight = np.array([0.0] + [float(self.edge_weight[v]) for v in nodes[1:]])
        slot = None
        if self.is_bary:
            slot = np.array([-1] + [int(self.slot[v]) for v in nodes[1:]], dtype=np.int64)
        return WeightedTree(parent, weight, slot, self.b)

    def root_subtrees(self) -> list[tuple[Optional["WeightedTree"], float]]:
        """Per slot: (subtree or None, weight of the root edge); b-ary trees only."""
        if not self.is_bary:
            raise ValueError("root subtrees by slot need a b-ary tree")
        out: list[tuple[Optional[WeightedTree], float]] = [(None, 0.0)] * self.b
        for k in range(1, self.n):
            if self.parent[k] == 0:
                out[int(self.slot[k])] = (self.subtree(k), float(self.edge_weight[k]))
        return out


def _perm_uniforms(rng: np.random.Generator, sampler: WeightSampler, shape: tuple[int, ...]) -> np.ndarray:
    if sampler.random:
        return rng.random(shape + (sampler.b - 1,))
    return np.zeros((1,) * len(shape) + (max(sampler.b - 1, 1),))


def grow_bary(n: int, b: int, sampler: WeightSampler, rng: np.random.Generator) -> WeightedTree:
    """Random b-ary recursive tree with ``n`` internal nodes.

    Each step converts a uniformly chosen external node (free child slot)
    into an internal node. Every node carries its own copy of ``Z``; a child
    in slot ``j`` gets weight ``Z_j`` of its parent's copy.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if b < 2 or sampler.b != b:
        raise ValueError(f"need b >= 2 matching the sampler (got b={b}, sampler b={sampler.b})")
    choice = rng.random(n - 1)
    perm_u = _perm_uniforms(rng, sampler, (n,))
    parent = np.empty(n, np.int64)
    slot = np.empty(n, np.int64)
    weight = np.empty(n)
    values = np.asarray(sampler.values, dtype=float)
    _kernels.grow_bary_into(n, b, choice, values, perm_u, sampler.random, parent, slot, weight)
    return WeightedTree(parent, weight, slot, b)


def grow_linear(n: int, beta: float, rng: np.random.Generator) -> WeightedTree:
    """Linear recursive tree: node ``k`` picks its parent with probability
    proportional to ``1 + beta * outdegree``. ``beta = 0`` is the random
    recursive tree, ``beta = 1`` the plane-oriented one."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    choice = rng.random(n - 1)
    parent = np.empty(n, np.int64)
    _kernels.grow_linear_into(n, float(beta), choice, parent)
    weight = np.ones(n)
    weight[0] = 0.0
    return WeightedTree(parent, weight)


@dataclass
class BarySample:
    """Functionals of many independent b-ary trees of the same size."""

    n: int
    path_length: np.ndarray
    wiener: np.ndarray
    split: np.ndarray  # (samples, b) root subtree sizes by slot
    root_z: np.ndarray  # (samples, b) root edge weights (0 for empty slots)


def _bary_block(n, b, sampler, seed, block, rows):
    g = stream(seed, TAG_BARY, block)
    choice = g.random((rows, max(n - 1, 0)))
    perm_u = _perm_uniforms(g, sampler, (rows, n))
    p = np.empty(rows)
    w = np.empty(rows)
    split = np.empty((rows, b), np.int64)
    rootz = np.empty((rows, b))
    _kernels.bary_batch(n, b, choice, np.asarray(sampler.values, dtype=float), perm_u,
                        sampler.random, p, w, split, rootz)
    return p, w, split, rootz


def _run_shards(work, shard_plan, shards):
    def run(plan):
        return [work(k, hi - lo) for k, lo, hi in plan]
    if shards == 1:
        results = [run(shard_plan[0])]
    else:
        with ThreadPoolExecutor(max_workers=shards) as pool:
            results = list(pool.map(run, shard_plan))
    return [part for shard in results for part in shard]


def simulate_bary(n: int, b: int, sampler: WeightSampler, samples: int, seed: int,
                  shards: int = 1) -> BarySample:
    """Simulate ``samples`` trees; output is identical for any shard count."""
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    if sampler.b != b:
        raise ValueError("sampler arity does not match b")
    plan = shard_blocks(samples, shards)
    parts = _run_shards(lambda k, rows: _bary_block(n, b, sampler, seed, k, rows), plan, shards)
    return BarySample(
        n,
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        np.concatenate([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts]),
    )


def _linear_block(n, beta, seed, block, rows):
    g = stream(seed, TAG_LINEAR, block)
    choice = g.random((rows, max(n - 1, 0)))
    p = np.empty(rows)
    w = np.empty(rows)
    _kernels.linear_batch(n, float(beta), choice, p, w)
    return p, w


def simulate_linear(n: int, beta: float, samples: int, seed: int,
                    shards: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """(path lengths, Wiener indices) of ``samples`` linear recursive trees."""
    if n < 1 or samples < 1:
        raise ValueError("need n >= 1 and samples >= 1")
    plan = shard_blocks(samples, shards)
    parts = _run_shards(lambda k, rows: _linear_block(n, beta, seed, k, rows), plan, shards)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])
