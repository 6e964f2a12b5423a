"""Weighted internal path length and Wiener index."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .tree_models import WeightedTree


@dataclass(frozen=True)
class FunctionalPair:
    path_length: float
    wiener: float


def subtree_sizes(tree: WeightedTree) -> np.ndarray:
    return _kernels.subtree_sizes(tree.parent)


def path_length(tree: WeightedTree) -> float:
    """Sum of weighted depths, computed as ``sum_e z_e * (nodes below e)``."""
    if tree.n == 1:
        return 0.0
    s = subtree_sizes(tree)
    return math.fsum((tree.edge_weight[1:] * s[1:]).tolist())


def wiener_index(tree: WeightedTree) -> float:
    """Sum of weighted distances over unordered node pairs.

    Edge ``e`` lies on the path of exactly ``s_e (n - s_e)`` pairs.
    """
    n = tree.n
    if n == 1:
        return 0.0
    s = subtree_sizes(tree)[1:]
    return math.fsum((tree.edge_weight[1:] * s * (n - s)).tolist())


def functionals(tree: WeightedTree) -> FunctionalPair:
    return FunctionalPair(path_length(tree), wiener_index(tree))


def wiener_index_pairwise(tree: WeightedTree) -> float:
    """O(n^2) oracle: breadth-first search from every node."""
    n = tree.n
    adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
    for k in range(1, n):
        p = int(tree.parent[k])
        w = float(tree.edge_weight[k])
        adj[k].append((p, w))
        adj[p].append((k, w))
    total = []
    for src in range(n):
        dist = [-1.0] * n
        dist[src] = 0.0
        queue = deque([src])
        while queue:
            v = queue.popleft()
            for u, w in adj[v]:
                if dist[u] < 0:
                    dist[u] = dist[v] + w
                    queue.append(u)
        total.extend(dist[src + 1:])
    return math.fsum(total)


def path_length_by_depth(tree: WeightedTree) -> float:
    """Oracle: explicit depths by walking parent pointers in label order."""
    depth = [0.0] * tree.n
    for k in range(1, tree.n):
        depth[k] = depth[int(tree.parent[k])] + float(tree.edge_weight[k])
    return math.fsum(depth)


def root_split(tree: WeightedTree) -> tuple[int, ...]:
    """Root subtree sizes ``(I_1, ..., I_b)`` in slot order; they sum to ``n - 1``."""
    if not tree.is_bary:
        raise ValueError("root split needs a b-ary tree (linear trees have no fixed slots)")
    s = subtree_sizes(tree)
    split = [0] * tree.b
    for k in range(1, tree.n):
        if tree.parent[k] == 0:
            split[int(tree.slot[k])] = int(s[k])
    return tuple(split)


def root_weights(tree: WeightedTree) -> tuple[float, ...]:
    """Weights of the root edges by slot (0 where the slot is empty)."""
    if not tree.is_bary:
        raise ValueError("root weights by slot need a b-ary tree")
    z = [0.0] * tree.b
    for k in range(1, tree.n):
        if tree.parent[k] == 0:
            z[int(tree.slot[k])] = float(tree.edge_weight[k])
    return tuple(z)
