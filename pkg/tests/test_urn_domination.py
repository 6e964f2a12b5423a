import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from treetails.exact_engine import split_marginal
from treetails.recursion_core import f
from treetails.urn_domination import (
    DominatingLaw, UrnState, alpha, bst_s_law, check_domination, check_domination_range, coupled_run,
    coupled_runs, kernel_domination_violations, kernel_prime, kernel_prime_urn, kernel_pu, kernels,
    plain_urn_counts, random_sum_pair, s_law, sorted_split_law, sorted_split_laws, sorted_states,
    stochastically_dominated, sum_inequality_check, urn_step,
)


def test_urn_step_symmetric_start():
    g = np.random.default_rng(0)
    hits = sum(urn_step(UrnState((0, 0)), 2, g).counts[0] for _ in range(20_000))
    assert abs(hits / 20_000 - 0.5) < 4 * math.sqrt(0.25 / 20_000)


def test_urn_step_counts_match_split_marginal():
    g = np.random.default_rng(1)
    b, n, runs = 3, 6, 20_000
    firsts = []
    for _ in range(runs):
        s = UrnState((0,) * b)
        for _ in range(n - 1):
            s = urn_step(s, b, g)
        firsts.append(s.counts[0])
    exact = split_marginal(n, b)
    obs = np.bincount(firsts, minlength=n)
    assert stats.chisquare(obs, [float(exact[k]) * runs for k in range(n)]).pvalue > 1e-6


def test_kernel_examples():
    k = kernels((1, 0), 1, 2)
    assert k.k == {(2, 0): Fraction(2, 3), (1, 1): Fraction(1, 3)}
    assert sum(k.k_prime.values()) == 1
    assert k.k_prime[(1, 0)] == Fraction(1 + (1 - 1) * 2, 2 + 1 + 2)
    with pytest.raises(ValueError):
        kernel_pu((0, 1), 1, 2)


def test_alpha_convention():
    assert alpha((3, 3, 1)) == [2, 0, 1]
    assert alpha((0, 0, 0)) == [3, 0, 0]


def test_kernels_normalised():
    for b in range(2, 5):
        for n in range(0, 51):
            for x in sorted_states(n, b):
                assert sum(kernel_pu(x, n, b).values()) == 1
                assert sum(kernel_prime(x, n, b).values()) == 1


def test_displayed_kernels_dominated():
    for b in (2, 3):
        for n in range(0, 31):
            assert kernel_domination_violations(n, b) == []


def test_urn_kernel_counterexample():
    # the actual top-2 of a 3-colour urn is not dominated by the 2-colour urn
    x = (1, 0)
    true_kernel = kernel_prime_urn(x, 1, 2)
    assert true_kernel == {(2, 0): Fraction(3, 5), (1, 1): Fraction(2, 5)}
    assert not stochastically_dominated(true_kernel, kernel_pu(x, 1, 2))
    assert kernel_prime_urn((0, 0), 0, 2) == {(1, 0): 1}
    assert kernel_domination_violations(1, 2, urn_kernel=True) == [((1, 0), (1, 0))]


def test_upper_set_check():
    p = {(1, 0): Fraction(1, 2), (0, 1): Fraction(1, 2)}
    q = {(1, 1): Fraction(1)}
    assert stochastically_dominated(p, q) and not stochastically_dominated(q, p)


def test_coupled_run_ordering():
    r = coupled_run(200, 3, np.random.default_rng(4))
    assert np.all(r.j[0] == 0) and np.all(r.i[0] == 0)
    assert np.all(r.i <= r.j)
    assert np.all(r.j.sum(axis=1) == np.arange(201))
    assert np.all(np.diff(r.j, axis=1) <= 0)


def test_coupled_runs_marginal():
    n = 120
    for b in (2, 3):
        s = coupled_runs(n, b, 4000, seed=9, shards=2)
        assert s.violations == 0
        plain = plain_urn_counts(n, b, 4000, seed=9)
        assert stats.ks_2samp(s.final_j[:, 0], plain[:, 0]).pvalue > 1e-6
        again = coupled_runs(n, b, 4000, seed=9, shards=1)
        assert np.array_equal(s.final_j, again.final_j)


def test_dominating_law():
    assert DominatingLaw.cdf(0.5) == 0 and DominatingLaw.cdf(1.2) == 1
    assert abs(DominatingLaw.cdf(0.8) - math.sqrt(0.2)) < 1e-15
    # P(1 - U(1-U) <= v) by simulation
    u = np.random.default_rng(2).random(200_000)
    v = 1 - u * (1 - u)
    assert abs(np.mean(v <= 0.8) - math.sqrt(0.2)) < 0.005


def test_domination_small_cases():
    r = check_domination(2, 2)
    assert r.ok and abs(r.s_max - f(0.5)) < 1e-15
    for b in (2, 3):
        assert all(r.ok for r in check_domination_range(40, b))


def test_bst_chain():
    for n in (5, 17, 60):
        laws = dict(sorted_split_laws(n, 2))
        atoms, probs = s_law(n, laws[n])
        ba, bp = bst_s_law(n)
        # collect both laws on their rounded atoms
        def collect(a, p):
            out = {}
            for x, w in zip(np.round(a, 12), p):
                out[x] = out.get(x, 0) + w
            return out
        left, right = collect(atoms, probs), collect(ba, bp)
        assert left.keys() == right.keys()
        assert all(abs(left[k] - right[k]) < 1e-12 for k in left)
        grid = np.linspace(0, 1, 10_000)
        cdf = np.concatenate([[0.0], np.cumsum(bp)])[np.searchsorted(ba, grid, side="right")]
        assert np.all(cdf >= DominatingLaw.cdf(grid) - 1e-12)


def test_sorted_split_law_exact_total():
    assert sorted_split_law(6, 3).total() == 1


def test_sum_inequality_edge_and_random():
    x = np.array([0.5, 0.3, 0.2])
    assert sum_inequality_check(x, np.append(x, 0.0))
    g = np.random.default_rng(7)
    for b in range(2, 6):
        for _ in range(20_000):
            assert sum_inequality_check(*random_sum_pair(b, g))


@settings(max_examples=300, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**32 - 1))
def test_sum_inequality_property(b, seed):
    x, y = random_sum_pair(b, np.random.default_rng(seed))
    assert np.all(y[:b] <= x + 1e-15) and abs(x.sum() - 1) < 1e-12
    assert sum_inequality_check(x, y)
