import math
from fractions import Fraction

import numpy as np
import pytest

from treetails.exact_engine import expectations
from treetails.recursion_core import (
    coeff_matrix, estimate_d_bound, f, f_second_derivative, g_at_three_quarters, g_convexity,
    op_norm_sq, sample_root_splits, scaled_vector, sum_op_norm_sq, toll_from_split,
    toll_residual, toll_summary,
)
from treetails.rng import stream
from treetails.tree_models import WeightSampler, grow_bary, simulate_bary
from treetails.functionals import root_split, root_weights


def test_f_values():
    assert f(0.0) == 0.0 and f(1.0) == 1.0
    assert abs(f(0.5) - (1 / 16 + (1 / 8) * (1 + math.sqrt(5) / 2))) < 1e-15
    assert abs(f(0.5) - 0.32725) < 1e-5
    m = coeff_matrix(1, 2)
    assert abs(op_norm_sq(m) - np.linalg.norm(m.entries, 2) ** 2) < 1e-12
    assert op_norm_sq(coeff_matrix(0, 5)) == 0.0


def test_coeff_matrix_range():
    with pytest.raises(ValueError):
        coeff_matrix(5, 5)
    assert coeff_matrix(4, 5).ratio == Fraction(4, 5)


def test_closed_form_vs_eigen_exhaustive():
    worst = 0.0
    for n in range(1, 201):
        for i in range(n):
            m = coeff_matrix(i, n)
            worst = max(worst, abs(m.closed_form_sq() - m.eigen_sq()))
    assert worst <= 1e-12


def test_convexity():
    x = np.linspace(0, 1, 10_001)
    h = x[1] - x[0]
    fd = (f(x[2:]) - 2 * f(x[1:-1]) + f(x[:-2])) / h ** 2
    assert fd.min() >= -1e-9
    assert np.all(f_second_derivative(x) >= g_convexity(x) - 1e-12)
    assert g_at_three_quarters() == 0
    assert g_convexity(x).min() >= -1e-12


def test_toll_n1_and_n2():
    table = expectations(5, 2, 1.0)
    t1 = grow_bary(1, 2, WeightSampler.unit(2), stream(0, 7))
    assert np.all(toll_residual(t1, table).d == 0)
    t2 = grow_bary(2, 2, WeightSampler.unit(2), stream(0, 7))
    # P2 = W2 = 1 deterministic, so X2 = 0 and d = X2 - A X1 = 0
    assert np.allclose(toll_residual(t2, table).d, 0.0)
    assert np.allclose(scaled_vector(1.0, 1.0, 2, table), 0.0)


def test_toll_split_formula_equals_tree_residual():
    sampler = WeightSampler.perm((1.0, 0.5, 0.0))
    table = expectations(60, 3, sampler.mu)
    for seed in range(20):
        t = grow_bary(60, 3, sampler, stream(seed, 55))
        d_tree = toll_residual(t, table).d
        d_split = toll_from_split(np.array(root_split(t)), np.array(root_weights(t)), 60, table)
        assert np.allclose(d_tree, d_split, atol=1e-12)


def test_toll_mean_zero():
    n = 100
    table = expectations(n, 2, 1.0)
    s = simulate_bary(n, 2, WeightSampler.unit(2), 100_000, seed=21)
    d = toll_from_split(s.split, s.root_z, n, table)
    mean = d.mean(axis=0)
    se = d.std(axis=0, ddof=1) / math.sqrt(len(d))
    assert np.all(np.abs(mean) <= 4 * se)


def test_main_term_is_close():
    n = 2000
    sampler = WeightSampler.unit(2)
    table = expectations(n, 2, 1.0)
    split, z = sample_root_splits(n, 2, sampler, 2000, seed=3)
    summary = toll_summary(split, z, n, 2, table)
    assert max(summary["main_term_max_abs_diff"]) < 0.05
    assert summary["samples"] == 2000


def test_sum_op_norm_sq_range():
    assert sum_op_norm_sq((1, 0), 2) == pytest.approx(f(0.5))


def test_estimate_d_bound():
    sampler = WeightSampler.unit(2)
    small = estimate_d_bound(2, sampler, 300, 50, seed=1)
    big = estimate_d_bound(2, sampler, 300, 200, seed=1)
    assert big.raw_max >= small.raw_max  # the larger sample extends the smaller one
    assert big.value == pytest.approx(1.1 * big.raw_max)
    assert big.provenance["source"] == "estimate"
    assert big.value <= 1.1
    with pytest.raises(ValueError):
        estimate_d_bound(2, sampler, 1, 10)
