from fractions import Fraction

import pytest

from treetails.exact_engine import (
    Pmf, bst_mean_path_length, enumerate_bary, enumerate_linear, expectations, expectations_exact,
    split_marginal,
)
from treetails.tree_models import WeightSampler
from treetails.urn_domination import sorted_split_law


def test_n1_point_mass():
    assert enumerate_bary(1, 2).functionals.exact_equal(Pmf.point((0, 0)))
    assert enumerate_linear(1, 0).exact_equal(Pmf.point((0, 0)))


def test_bst_n3_by_hand():
    e = enumerate_bary(3, 2)
    assert e.path_length.exact_equal(Pmf({2: Fraction(1, 3), 3: Fraction(2, 3)}))
    assert e.wiener.exact_equal(Pmf({4: Fraction(1)}))
    assert e.path_length.expect() == Fraction(8, 3)


def test_rrt_n3_by_hand():
    assert enumerate_linear(3, 0).map(lambda k: k[0]).exact_equal(Pmf({2: Fraction(1, 2), 3: Fraction(1, 2)}))


def test_sorted_split_matches_urn():
    for b, n in ((2, 5), (3, 4)):
        assert enumerate_bary(n, b).sorted_split.exact_equal(sorted_split_law(n, b))


def test_split_marginal():
    for n in (1, 4, 9):
        assert split_marginal(n, 2).exact_equal(Pmf({k: Fraction(1, n) for k in range(n)}))
    assert split_marginal(2, 3).exact_equal(Pmf({0: Fraction(2, 3), 1: Fraction(1, 3)}))
    assert split_marginal(12, 4).total() == 1


def test_expectations_against_enumeration():
    for b, n, sampler in ((2, 5, WeightSampler.unit(2)), (3, 4, WeightSampler.perm((1.0, 0.0, 0.0))),
                          (2, 4, WeightSampler.perm((2.0, 1.0)))):
        e = enumerate_bary(n, b, sampler).functionals
        table = expectations(n, b, sampler.mu)
        ep = e.expect(lambda k: k[0])
        ew = e.expect(lambda k: k[1])
        assert abs(table.ep[n] - float(ep)) < 1e-10 and abs(table.ew[n] - float(ew)) < 1e-10
        xp, xw = expectations_exact(n, b, Fraction(sampler.mu).limit_denominator(1000))
        assert xp[n] == ep and xw[n] == ew


def test_expectations_small_values():
    t = expectations(10, 2, 1.0)
    assert t.ep[2] == 1.0 and abs(t.ep[3] - 8 / 3) < 1e-15
    for n in range(1, 11):
        assert abs(t.ep[n] - bst_mean_path_length(n)) < 1e-12
    assert expectations(3, 3, 0.5).ep[2] == 0.5


def test_bst_closed_form_large():
    t = expectations(2000, 2, 1.0)
    assert abs(t.ep[2000] / bst_mean_path_length(2000) - 1) < 1e-12


def test_pmf_helpers():
    p = Pmf({1: Fraction(1, 2), 2: Fraction(1, 2)})
    q = Pmf.from_samples([1, 1, 2, 2])
    assert p.tv_distance(q) == 0 and p.support() == [1, 2]
    assert p.to_json()[0] == {"value": 1, "prob": 0.5, "exact": "1/2"}


def test_bad_sizes():
    with pytest.raises(ValueError):
        enumerate_bary(0, 2)
    with pytest.raises(ValueError):
        split_marginal(0, 2)
