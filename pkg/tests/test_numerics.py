import math

import numpy as np
import pytest
from scipy.optimize import brentq
from scipy.special import dawsn

from treetails.numerics import (
    constants, exp_neg_quadratic_mean, fill_janson_k, fill_janson_large_s_lhs, fill_janson_rhs,
    integrate, small_s_certificate, solve_gamma, solve_l0,
)

# frozen from scipy.optimize.brentq on the defining equations (xtol 1e-15)
GAMMA = 2.004670754548499
L0 = 5.017704642402041


def test_gamma_matches_independent_root():
    g = solve_gamma(1e-10)
    assert abs(g - 2.0047) < 1e-3
    ref = brentq(lambda x: math.exp(2 / x) - 2 / x - 12 / 7, 1.5, 2.5, xtol=1e-15)
    assert abs(solve_gamma() - ref) < 1e-13
    assert abs(solve_gamma() - GAMMA) < 1e-13
    assert abs(math.exp(2 / g) - 2 / g - 12 / 7) <= 1e-10


def test_gamma_refinement_is_stable():
    assert abs(solve_gamma(1e-6) - solve_gamma(1e-12)) < 1e-6


def test_l0_is_largest_root():
    l0 = solve_l0(1e-10)
    assert abs(l0 - 5.0177) < 1e-3
    assert abs(math.exp(l0) / (6 * l0 * l0) - 1) < 1e-9
    assert abs(solve_l0() - L0) < 1e-12
    # sign scan on (0, 10): a smaller root sits below 1
    xs = np.linspace(0.01, 10, 5000)
    h = np.exp(xs) - 6 * xs * xs
    roots = xs[:-1][np.sign(h[:-1]) != np.sign(h[1:])]
    assert len(roots) == 2 and roots[0] < 1 and abs(roots[-1] - l0) < 0.01
    assert l0 > 2
    assert math.exp(l0 - 1e-6) - 6 * (l0 - 1e-6) ** 2 < 0 < math.exp(l0 + 1e-6) - 6 * (l0 + 1e-6) ** 2


def test_constants_record():
    c = constants()
    assert 2.0 < c.gamma < 2.01 and 5.01 < c.l0 < 5.02
    d = c.as_dict()
    assert set(d) == {"gamma", "l0", "gamma_residual", "l0_residual"}
    assert d["gamma_residual"] <= 1e-10 and d["l0_residual"] <= 1e-10


def test_integrate_polynomial():
    assert abs(integrate(lambda x: x ** 3, 0.0, 2.0) - 4.0) < 1e-12


def test_exp_neg_quadratic_mean():
    assert exp_neg_quadratic_mean(0.0) == 1.0
    assert exp_neg_quadratic_mean(1.0) > exp_neg_quadratic_mean(2.0)
    # Dawson-function closed form as an independent oracle
    for c in (0.5, 3.0, 40.0):
        a = math.sqrt(c) / 2
        assert abs(exp_neg_quadratic_mean(c) - dawsn(a) / a) < 1e-12
    assert exp_neg_quadratic_mean(2.0) <= fill_janson_rhs(1.0, 1.0)
    with pytest.raises(ValueError):
        exp_neg_quadratic_mean(-1.0)


def test_fill_janson_small_grid():
    for k in (0.1, 1.0, 10.0, 100.0):
        for s in np.linspace(0.1, 10, 100):
            assert exp_neg_quadratic_mean(2 * k * s * s) <= fill_janson_rhs(k, s) + 1e-10


def test_fill_janson_large_grid():
    for m in (1.0, L0, 6.0, 8.0):
        km = fill_janson_k(m, L0)
        for lam in np.linspace(0.42, m, 400):
            assert fill_janson_large_s_lhs(lam, km) <= 1 + 1e-9


def test_small_s_certificate():
    g = constants().gamma
    for d in (0.5, 1.0, 2.0):
        assert abs(small_s_certificate(1 / (g * d), d)) < 1e-9
    assert abs(small_s_certificate(0.0, 1.0) - g * g * (5 / 7 - 5 / 6)) < 1e-15
    vals = [small_s_certificate(s, 1.0) for s in np.linspace(0, 1 / g, 10_000)]
    assert max(vals) <= 1e-9
