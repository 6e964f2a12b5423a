"""The two-dimensional sum-type recursion for ``Y_n = (W_n, P_n)``.

With ``X_n = diag(1/n^2, 1/n) (Y_n - E[Y_n])`` one has, per sample,

    X_n = sum_i A_i(I_n) X^{(i)} + d(I_n, Z)

where ``X^{(i)}`` is the scaled pair of root subtree ``i`` and

    A_i = [[x^2, x(1 - x)], [0, x]],    x = I_{n,i} / n.

The toll ``d`` is computed here as the exact residual of that identity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exact_engine import ExpectationTable, expectations
from .functionals import functionals
from .rng import TAG_TOLL, stream
from .tree_models import WeightedTree, WeightSampler

EIGEN_TOLERANCE = 1e-12


def f(x):
    """Squared operator norm of ``A_i`` as a function of ``x = I/n``:
    ``x^4 + (x^2 - x^3)(1 + sqrt(x^2 + 1))``. Works on scalars and arrays."""
    return x**4 + (x**2 - x**3) * (1.0 + np.sqrt(x * x + 1.0))


def g_convexity(x):
    """``10x^2 + (2 - 6x)(1 + sqrt(x^2 + 1))``, a lower bound for ``f''`` on [0, 1]."""
    return 10.0 * x * x + (2.0 - 6.0 * x) * (1.0 + np.sqrt(x * x + 1.0))


def g_at_three_quarters() -> Fraction:
    """``g(3/4)`` in exact arithmetic: ``sqrt(9/16 + 1) = 5/4`` is rational."""
    x = Fraction(3, 4)
    root = Fraction(5, 4)
    assert root * root == x * x + 1
    return 10 * x * x + (2 - 6 * x) * (1 + root)


def f_second_derivative(x):
    """Closed-form ``f''``."""
    r = np.sqrt(x * x + 1.0)
    return (12.0 * x * x + (2.0 - 6.0 * x) * (1.0 + r)
            + 2.0 * (2.0 * x * x - 3.0 * x**3) / r + (x * x - x**3) / r**3)


def sym2_max_eigenvalue(a: float, b: float, c: float) -> float:
    """Largest eigenvalue of ``[[a, b], [b, c]]`` by the quadratic formula."""
    half = 0.5 * (a - c)
    return 0.5 * (a + c) + math.hypot(half, b)


@dataclass(frozen=True)
class CoeffMatrix:
    i: int
    n: int

    @property
    def ratio(self) -> Fraction:
        return Fraction(self.i, self.n)

    @property
    def entries(self) -> np.ndarray:
        x = self.i / self.n
        return np.array([[x * x, x * (1.0 - x)], [0.0, x]])

    def closed_form_sq(self) -> float:
        return float(f(self.i / self.n))

    def eigen_sq(self) -> float:
        """Largest eigenvalue of ``A^T A`` computed directly."""
        x = self.i / self.n
        a00, a01, a11 = x * x, x * (1.0 - x), x
        return sym2_max_eigenvalue(a00 * a00, a00 * a01, a01 * a01 + a11 * a11)


def coeff_matrix(i: int, n: int) -> CoeffMatrix:
    if n < 1 or not 0 <= i <= n - 1:
        raise ValueError(f"need 0 <= i <= n - 1, got i={i}, n={n}")
    return CoeffMatrix(i, n)


def op_norm_sq(m: CoeffMatrix) -> float:
    """``||A||_op^2``; the closed form is returned after checking it against the
    direct eigenvalue."""
    closed = m.closed_form_sq()
    direct = m.eigen_sq()
    if abs(closed - direct) > EIGEN_TOLERANCE:
        raise ArithmeticError(f"closed form {closed} != eigenvalue {direct} at {m.i}/{m.n}")
    return closed


@dataclass(frozen=True)
class TollResidual:
    d: np.ndarray  # (wiener component, path component)

    @property
    def norm(self) -> float:
        return float(np.hypot(self.d[0], self.d[1]))


def scaled_vector(p: float, w: float, n: int, table: ExpectationTable) -> np.ndarray:
    """``X_n = ((W - E W_n)/n^2, (P - E P_n)/n)``; zero for ``n <= 1``."""
    if n <= 1:
        return np.zeros(2)
    if not table.covers(n):
        raise ValueError(f"expectation table stops at n={table.n_max}, need {n}")
    return np.array([(w - table.ew[n]) / (n * n), (p - table.ep[n]) / n])


def toll_residual(tree: WeightedTree, table: ExpectationTable) -> TollResidual:
    """``d = X_n - sum_i A_i(I_n) X^{(i)}`` on one tree, from its root subtrees."""
    n = tree.n
    if not table.covers(n):
        raise ValueError(f"expectation table stops at n={table.n_max}, need {n}")
    if n == 1:
        return TollResidual(np.zeros(2))
    fp = functionals(tree)
    d = scaled_vector(fp.path_length, fp.wiener, n, table)
    for sub, _ in tree.root_subtrees():
        if sub is None:
            continue
        sp = functionals(sub)
        d = d - coeff_matrix(sub.n, n).entries @ scaled_vector(sp.path_length, sp.wiener, sub.n, table)
    return TollResidual(d)


def toll_from_split(split, z, n: int, table: ExpectationTable) -> np.ndarray:
    """Toll as a function of the root split and root weights only.

    Vectorised: ``split`` and ``z`` have shape ``(..., b)``; returns ``(..., 2)``.
    Follows from ``P_n = sum_i (P^{(i)} + Z_i I_i)`` and
    ``W_n = sum_i W^{(i)} + (n - I_i)(P^{(i)} + Z_i I_i)``.
    """
    split = np.asarray(split)
    z = np.asarray(z, dtype=float)
    if not table.covers(n):
        raise ValueError(f"expectation table stops at n={table.n_max}, need {n}")
    if n == 1:
        return np.zeros(split.shape[:-1] + (2,))
    rest = n - split
    zi = z * split
    d_p = (zi.sum(-1) + table.ep[split].sum(-1) - table.ep[n]) / n
    d_w = ((rest * zi).sum(-1) + (table.ew[split] + rest * table.ep[split]).sum(-1) - table.ew[n]) / (n * n)
    return np.stack([d_w, d_p], axis=-1)


def toll_main_term(split, z, n: int, b: int, mu: float) -> np.ndarray:
    """Leading terms of the toll (the vanishing corrections omitted); vectorised like
    :func:`toll_from_split`."""
    x = np.asarray(split, dtype=float) / n
    z = np.asarray(z, dtype=float)
    c = b / (b - 1) * mu
    with np.errstate(divide="ignore", invalid="ignore"):
        xlogx = np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0).sum(-1)
    # sum over ordered pairs i != j of (Z_i + Z_j)/2 x_i x_j and of x_i x_j
    sx = x.sum(-1)
    szx = (z * x).sum(-1)
    cross_z = szx * sx - (z * x * x).sum(-1)
    cross = sx * sx - (x * x).sum(-1)
    d_w = c * xlogx + cross_z + c * cross
    d_p = c * xlogx + szx
    return np.stack([d_w, d_p], axis=-1)


def reconstruct_from_subtrees(tree: WeightedTree) -> tuple[float, float]:
    """``(P_n, W_n)`` rebuilt from root-subtree functionals via the decomposition."""
    n = tree.n
    p = 0.0
    w = 0.0
    for sub, z in tree.root_subtrees():
        if sub is None:
            continue
        sp = functionals(sub)
        p += sp.path_length + z * sub.n
        w += sp.wiener + (n - sub.n) * (sp.path_length + z * sub.n)
    return p, w


def sum_op_norm_sq(split, n: int) -> float:
    return float(sum(op_norm_sq(coeff_matrix(i, n)) for i in split))


def sample_root_splits(n: int, b: int, sampler: WeightSampler, samples: int, seed: int
                       ) -> tuple[np.ndarray, np.ndarray]:
    """``samples`` draws of (root split, root weight vector) for trees of size ``n``.

    The split of PU(b) is Dirichlet-multinomial with parameters ``1/(b-1)``.
    Each piece has its own stream, so a larger ``samples`` extends a smaller one.
    """
    if n == 1:
        return np.zeros((samples, b), np.int64), np.tile(sampler.values, (samples, 1))
    probs = stream(seed, TAG_TOLL, b, n, 0).dirichlet(np.full(b, 1.0 / (b - 1)), size=samples)
    mult = stream(seed, TAG_TOLL, b, n, 1)
    split = mult.multinomial(n - 1, probs).astype(np.int64)
    z = np.tile(np.asarray(sampler.values, dtype=float), (samples, 1))
    if sampler.random:
        z = stream(seed, TAG_TOLL, b, n, 2).permuted(z, axis=1)
    return split, z


@dataclass(frozen=True)
class DBoundEstimate:
    value: float
    raw_max: float
    argmax_n: int
    safety: float
    provenance: dict = field(default_factory=dict)


def estimate_d_bound(b: int, sampler: WeightSampler, n_max: int, samples: int, seed: int = 0,
                     safety: float = 1.1, table: ExpectationTable | None = None) -> DBoundEstimate:
    """Empirical ``max ||d||`` over sizes ``2..n_max``, times ``safety``.

    An estimator, not a proof. Uses that the toll depends on a tree only
    through its root split and root weights.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    if n_max < 2:
        raise ValueError("n_max must be >= 2")
    table = table or expectations(n_max, b, sampler.mu)
    best, arg = 0.0, 2
    for n in range(2, n_max + 1):
        split, z = sample_root_splits(n, b, sampler, samples, seed)
        norms = np.hypot(*np.moveaxis(toll_from_split(split, z, n, table), -1, 0))
        m = float(norms.max())
        if m > best:
            best, arg = m, n
    return DBoundEstimate(
        value=best * safety, raw_max=best, argmax_n=arg, safety=safety,
        provenance={"source": "estimate", "b": b, "weights": str(sampler), "n_max": n_max,
                    "samples_per_n": samples, "seed": seed, "safety": safety},
    )


def toll_summary(trees_split: np.ndarray, trees_z: np.ndarray, n: int, b: int,
                 table: ExpectationTable) -> dict:
    """Max and mean of the exact toll, and its distance to the leading terms."""
    d = toll_from_split(trees_split, trees_z, n, table)
    main = toll_main_term(trees_split, trees_z, n, b, table.mu)
    norms = np.hypot(d[:, 0], d[:, 1])
    return {
        "n": n,
        "samples": int(len(d)),
        "max_norm": float(norms.max()),
        "mean": d.mean(axis=0).tolist(),
        "stderr": (d.std(axis=0, ddof=1) / math.sqrt(len(d))).tolist() if len(d) > 1 else [0.0, 0.0],
        "main_term_max_abs_diff": np.abs(d - main).max(axis=0).tolist(),
        "main_term_mean_diff": (d - main).mean(axis=0).tolist(),
    }

