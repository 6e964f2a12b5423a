import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from treetails.functionals import (
    functionals, path_length, path_length_by_depth, root_split, root_weights, wiener_index,
    wiener_index_pairwise,
)
from treetails.recursion_core import reconstruct_from_subtrees
from treetails.rng import stream
from treetails.tree_models import (
    WeightedTree, WeightSampler, grow_bary, grow_linear, simulate_bary, simulate_linear,
)


def test_weight_sampler_parse():
    assert WeightSampler.parse("unit", 3) == WeightSampler.unit(3)
    s = WeightSampler.parse("perm:1,0,0", 3)
    assert s.random and abs(s.mu - 1 / 3) < 1e-15 and str(s) == "perm:1,0,0"
    assert sum(p for _, p in s.support()) == 1 and len(s.support()) == 3
    assert not WeightSampler.parse("const:2,2", 2).random
    with pytest.raises(ValueError):
        WeightSampler.parse("const:1,2", 2)
    with pytest.raises(ValueError):
        WeightSampler.parse("perm:1,0", 3)
    with pytest.raises(ValueError):
        WeightSampler.perm((1.0, -1.0))


def test_single_node():
    t = grow_bary(1, 2, WeightSampler.unit(2), stream(0, 1))
    assert t.n == 1 and path_length(t) == 0 and wiener_index(t) == 0
    assert root_split(t) == (0, 0)


def test_chain_hand_case():
    t = WeightedTree(np.array([-1, 0, 1]), np.array([0.0, 1.0, 1.0]), np.array([-1, 0, 1]), 2)
    t.validate()
    assert path_length(t) == 3 and wiener_index(t) == 4


def test_n2_unit():
    t = grow_bary(2, 2, WeightSampler.unit(2), stream(0, 1))
    assert path_length(t) == 1 and wiener_index(t) == 1


def test_validate_rejects_bad_labels():
    with pytest.raises(ValueError):
        WeightedTree(np.array([-1, 2, 0]), np.ones(3), np.array([-1, 0, 1]), 2).validate()
    with pytest.raises(ValueError):
        WeightedTree(np.array([-1, 0, 0]), np.ones(3), np.array([-1, 0, 0]), 2).validate()


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 60), st.integers(2, 4), st.integers(0, 2**32 - 1), st.booleans())
def test_functionals_match_oracles(n, b, seed, perm):
    sampler = WeightSampler.perm([1.0] + [0.5] * (b - 2) + [0.0]) if perm else WeightSampler.unit(b)
    t = grow_bary(n, b, sampler, stream(seed, 99))
    t.validate()
    assert sum(root_split(t)) == n - 1
    assert abs(path_length(t) - path_length_by_depth(t)) < 1e-9
    assert abs(wiener_index(t) - wiener_index_pairwise(t)) < 1e-9
    p, w = reconstruct_from_subtrees(t)
    fp = functionals(t)
    assert abs(p - fp.path_length) < 1e-9 and abs(w - fp.wiener) < 1e-9
    for z, (sub, zz) in zip(root_weights(t), t.root_subtrees()):
        assert z == zz


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 60), st.sampled_from([0.0, 0.5, 1.0, 3.0]), st.integers(0, 2**32 - 1))
def test_linear_functionals(n, beta, seed):
    t = grow_linear(n, beta, stream(seed, 98))
    t.validate()
    assert abs(wiener_index(t) - wiener_index_pairwise(t)) < 1e-9
    with pytest.raises(ValueError):
        root_split(t)


def test_third_node_position():
    # b = 2, n = 3: child of root w.p. 1/3 (balanced shape)
    s = simulate_bary(3, 2, WeightSampler.unit(2), 60_000, seed=3)
    freq = np.mean(s.path_length == 2)
    assert abs(freq - 1 / 3) < 4 * math.sqrt(2 / 9 / 60_000)


def test_rrt_third_node():
    p, _ = simulate_linear(3, 0.0, 60_000, seed=4)
    assert abs(np.mean(p == 2) - 0.5) < 4 * math.sqrt(0.25 / 60_000)


def test_bst_left_subtree_uniform():
    n = 20
    s = simulate_bary(n, 2, WeightSampler.unit(2), 50_000, seed=5)
    counts = np.bincount(s.split[:, 0], minlength=n)
    assert stats.chisquare(counts).pvalue > 1e-6


def test_shard_invariance_and_determinism():
    sampler = WeightSampler.perm((1.0, 0.0, 0.0))
    a = simulate_bary(50, 3, sampler, 5000, seed=11, shards=1)
    b = simulate_bary(50, 3, sampler, 5000, seed=11, shards=3)
    assert np.array_equal(a.path_length, b.path_length) and np.array_equal(a.wiener, b.wiener)
    assert np.array_equal(a.split, b.split)
    c = simulate_bary(50, 3, sampler, 5000, seed=12)
    assert not np.array_equal(a.path_length, c.path_length)
    la = simulate_linear(40, 1.0, 3000, seed=2, shards=1)
    lb = simulate_linear(40, 1.0, 3000, seed=2, shards=4)
    assert all(np.array_equal(x, y) for x, y in zip(la, lb))


def test_batch_matches_single_tree_functionals():
    # the batched kernel and the tree object agree on the same uniforms
    sampler = WeightSampler.perm((2.0, 1.0))
    s = simulate_bary(30, 2, sampler, 1, seed=8)
    g = stream(8, 1, 0)
    t = grow_bary(30, 2, sampler, g)
    assert abs(path_length(t) - s.path_length[0]) < 1e-9
    assert abs(wiener_index(t) - s.wiener[0]) < 1e-9
    assert tuple(s.split[0]) == root_split(t)
