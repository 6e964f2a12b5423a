"""Experiment plumbing: config, seeded simulations, tail tables, goodness of fit
against the exact engine, and CSV/JSON output."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats

from .exact_engine import Pmf, enumerate_bary, enumerate_linear, expectations
from .numerics import constants
from .recursion_core import estimate_d_bound
from .tail_bounds import PiecewiseBound, upper_tail
from .tree_models import WeightSampler, simulate_bary, simulate_linear

CSV_HEADER = ("t", "side", "freq", "stderr", "bound", "margin")
SIDES = ("wiener_right", "wiener_left", "path_right", "path_left")
STDERR_FACTOR = 4.0
GOF_FACTOR = 5.0


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    model: str = "bary"  # "bary" or "linear"
    b: int = 2
    beta: float = 0.0
    n: int = 2000
    samples: int = 10_000
    weights: str = "unit"
    seed: int = 0
    shards: int = 1
    t_grid: Optional[tuple[float, ...]] = None  # None: default grid from D
    t_points: int = 64
    d_bound: Union[float, str] = 1.0  # a number or "estimate"
    d_estimate_n_max: Optional[int] = None
    d_estimate_samples: Optional[int] = None
    d_safety: float = 1.1
    out: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        if self.model not in ("bary", "linear"):
            raise ConfigError(f"unknown model {self.model!r}")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.n < 1:
            raise ConfigError("n must be >= 1")
        if self.shards < 1:
            raise ConfigError("shards must be >= 1")
        if self.format not in ("csv", "json"):
            raise ConfigError("format must be csv or json")
        if self.t_grid is not None:
            grid = tuple(float(t) for t in self.t_grid)
            if any(b <= a for a, b in zip(grid, grid[1:])) or any(t < 0 for t in grid):
                raise ConfigError("t grid must be nonnegative and strictly increasing")
            object.__setattr__(self, "t_grid", grid)
        if isinstance(self.d_bound, str) and self.d_bound != "estimate":
            object.__setattr__(self, "d_bound", float(self.d_bound))

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if data.get("t_grid") is not None:
            data = {**data, "t_grid": tuple(data["t_grid"])}
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def override(self, **values) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in values.items() if v is not None})

    def sampler(self) -> WeightSampler:
        return WeightSampler.parse(self.weights, self.b)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["t_grid"] is not None:
            d["t_grid"] = list(d["t_grid"])
        return d


# -- output -------------------------------------------------------------------

def fmt_float(x) -> str:
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def rows_to_csv(rows: list[dict], header=None) -> str:
    header = list(header or (rows[0].keys() if rows else []))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt_float(r[k]) for k in header])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def write_text(text: str, path: Optional[str]) -> None:
    if path is None:
        import sys
        sys.stdout.write(text)
        return
    Path(path).write_bytes(text.encode("utf-8"))


# -- tails --------------------------------------------------------------------

@dataclass
class TailRow:
    t: float
    side: str
    freq: float
    stderr: float
    bound: float
    margin: float


@dataclass
class TailReport:
    rows: list[TailRow]
    meta: dict = field(default_factory=dict)

    @property
    def breaches(self) -> list[TailRow]:
        return [r for r in self.rows if r.margin < 0]

    @property
    def ok(self) -> bool:
        return not self.breaches

    def to_csv(self) -> str:
        return rows_to_csv([asdict(r) for r in self.rows], CSV_HEADER)

    def to_json(self) -> str:
        d = self.meta.get("d_bound", {})
        rows = [{**asdict(r), "d_bound": d.get("value"), "d_source": d.get("source")} for r in self.rows]
        return to_json({"meta": self.meta, "rows": rows})


def default_t_grid(bound: PiecewiseBound, points: int = 64) -> np.ndarray:
    """``t = 0`` plus ``points`` log-spaced values on [0.01 D, 100 D], plus one
    point in each of the five regimes that the log grid misses."""
    d = bound.d_bound
    grid = np.geomspace(0.01 * d, 100.0 * d, points)
    edges = (0.0,) + bound.breakpoints
    extra = []
    hit = {bound.piece(t) for t in grid}
    for k in range(5):
        if k in hit:
            continue
        hi = edges[k + 1] if k < 4 else 2.0 * edges[4]
        extra.append(0.5 * (edges[k] + hi))
    return np.unique(np.concatenate([[0.0], grid, extra]))


def resolve_d_bound(cfg: ExperimentConfig) -> tuple[float, dict]:
    if cfg.d_bound != "estimate":
        return float(cfg.d_bound), {"source": "explicit", "value": float(cfg.d_bound)}
    if cfg.model != "bary":
        raise ConfigError("D estimation is only defined for b-ary trees; pass an explicit d_bound")
    if cfg.d_estimate_n_max is None or cfg.d_estimate_samples is None:
        raise ConfigError("d_bound='estimate' needs d_estimate_n_max and d_estimate_samples")
    est = estimate_d_bound(cfg.b, cfg.sampler(), cfg.d_estimate_n_max, cfg.d_estimate_samples,
                           seed=cfg.seed, safety=cfg.d_safety)
    return est.value, {**est.provenance, "value": est.value, "raw_max": est.raw_max,
                       "argmax_n": est.argmax_n}


def centering(cfg: ExperimentConfig) -> tuple[float, float]:
    """``(E[P_n], E[W_n])`` for the configured model.

    Linear trees with integer ``beta`` use the transfer to the
    ``(beta + 2)``-ary tree with weights ``(1, 0, ..., 0)``.
    """
    n = cfg.n
    if cfg.model == "bary":
        table = expectations(max(n, 1), cfg.b, cfg.sampler().mu)
        return float(table.ep[n]), float(table.ew[n])
    if float(cfg.beta) != int(cfg.beta):
        raise ConfigError("linear-tree centering needs an integer beta")
    if n == 1:
        return 0.0, 0.0
    b = int(cfg.beta) + 2
    table = expectations(n - 1, b, 1.0 / b)
    ep, ew = float(table.ep[n - 1]), float(table.ew[n - 1])
    return ep + (n - 1), ew - ep + (n - 1) ** 2


def simulate(cfg: ExperimentConfig) -> tuple[np.ndarray, np.ndarray]:
    """(P, W) arrays for ``cfg.samples`` trees."""
    if cfg.model == "bary":
        s = simulate_bary(cfg.n, cfg.b, cfg.sampler(), cfg.samples, cfg.seed, cfg.shards)
        return s.path_length, s.wiener
    return simulate_linear(cfg.n, cfg.beta, cfg.samples, cfg.seed, cfg.shards)


def run_tails(cfg: ExperimentConfig) -> TailReport:
    d, provenance = resolve_d_bound(cfg)
    bound = PiecewiseBound(d)
    grid = np.asarray(cfg.t_grid) if cfg.t_grid is not None else default_t_grid(bound, cfg.t_points)
    ep, ew = centering(cfg)
    p, w = simulate(cfg)
    n = cfg.n
    x = {"wiener": (w - ew) / (n * n), "path": (p - ep) / n}
    s = cfg.samples
    rows = []
    for t in grid:
        t = float(t)
        bnd = upper_tail(t, bound)
        for side in SIDES:
            comp, direction = side.split("_")
            hits = np.count_nonzero(x[comp] > t) if direction == "right" else np.count_nonzero(x[comp] < -t)
            freq = hits / s
            se = math.sqrt(freq * (1.0 - freq) / s)
            rows.append(TailRow(t, side, freq, se, bnd, bnd - (freq + STDERR_FACTOR * se)))
    meta = {
        "config": cfg.to_dict(),
        "d_bound": provenance,
        "constants": constants().as_dict(),
        "centering": {"EP": ep, "EW": ew},
        "breaches": 0,
    }
    report = TailReport(rows, meta)
    meta["breaches"] = len(report.breaches)
    return report


def write_tail_report(report: TailReport, out: Optional[str], fmt: str = "csv") -> None:
    """Write the table; with CSV to a file, provenance goes to ``<out>.meta.json``."""
    if fmt == "json":
        write_text(report.to_json(), out)
        return
    write_text(report.to_csv(), out)
    if out is not None:
        write_text(to_json(report.meta), str(out) + ".meta.json")


# -- goodness of fit ----------------------------------------------------------

def _key(p, w) -> tuple[float, float]:
    return round(float(p), 9), round(float(w), 9)


@dataclass
class GofReport:
    model: str
    n: int
    b: int
    samples: int
    cells: int
    tv: float
    tolerance: float  # GOF_FACTOR * max binomial stderr over exact cells
    chi2_pvalue: float
    unexpected: int  # simulated values outside the exact support

    @property
    def ok(self) -> bool:
        return self.tv <= self.tolerance and self.unexpected == 0

    def row(self) -> dict:
        return {**asdict(self), "ok": self.ok}


def compare_to_exact(exact: Pmf, values: list[tuple[float, float]], model: str, n: int, b: int) -> GofReport:
    """TV distance and pooled chi-square of samples against an exact law."""
    s = len(values)
    probs = {}
    for k, pr in exact.probs.items():
        kk = _key(*k)
        probs[kk] = probs.get(kk, 0.0) + float(pr)
    counts: dict = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    unexpected = sum(c for k, c in counts.items() if k not in probs)
    keys = sorted(probs)
    pr = np.array([probs[k] for k in keys])
    obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
    tv = 0.5 * (np.abs(obs / s - pr).sum() + unexpected / s)
    tol = GOF_FACTOR * float(np.sqrt(pr * (1 - pr) / s).max())
    exp_counts = pr * s
    # pool cells with expected count < 5 into one
    small = exp_counts < 5
    o = np.append(obs[~small], obs[small].sum()) if small.any() else obs
    e = np.append(exp_counts[~small], exp_counts[small].sum()) if small.any() else exp_counts
    pval = float(stats.chisquare(o, e * o.sum() / e.sum()).pvalue) if len(o) > 1 else 1.0
    return GofReport(model, n, b, s, len(keys), float(tv), tol, pval, int(unexpected))


def run_gof(cfg: ExperimentConfig) -> GofReport:
    if cfg.model == "bary":
        exact = enumerate_bary(cfg.n, cfg.b, cfg.sampler()).functionals
        b = cfg.b
    else:
        exact = enumerate_linear(cfg.n, cfg.beta)
        b = 0
    p, w = simulate(cfg)
    return compare_to_exact(exact, [_key(a, c) for a, c in zip(p, w)], cfg.model, cfg.n, b)


@dataclass
class TransferReport:
    n: int
    b: int
    exact_path_equal: Optional[bool]
    exact_wiener_equal: Optional[bool]
    tv_path: Optional[float]
    tv_tolerance: Optional[float]
    ks_path_pvalue: Optional[float]
    ks_wiener_pvalue: Optional[float]


def transfer_exact(n: int, b: int) -> tuple[bool, bool]:
    """Exact laws: linear tree with ``beta = b - 2`` at size ``n`` against the b-ary
    tree with weights ``(1, 0, ..., 0)`` at size ``n - 1``:
    ``P_n = P~ + (n - 1)`` and ``W_n = W~ - P~ + (n - 1)^2``."""
    lin = enumerate_linear(n, b - 2)
    bar = enumerate_bary(n - 1, b, _transfer_sampler(b)).functionals
    p_ok = lin.map(lambda k: k[0]).exact_equal(bar.map(lambda k: k[0] + n - 1))
    w_ok = lin.map(lambda k: k[1]).exact_equal(bar.map(lambda k: k[1] - k[0] + (n - 1) ** 2))
    return p_ok, w_ok


def _transfer_sampler(b: int) -> WeightSampler:
    return WeightSampler.perm((1.0,) + (0.0,) * (b - 1))


def transfer_empirical_tv(n: int, b: int, samples: int, seed: int, shards: int = 1) -> tuple[float, float]:
    """TV between simulated linear-tree ``P_n`` and the exact law of ``P~_{n-1} + n - 1``."""
    bar = enumerate_bary(n - 1, b, _transfer_sampler(b)).functionals.map(lambda k: k[0] + n - 1)
    p, _ = simulate_linear(n, b - 2, samples, seed, shards)
    r = compare_to_exact(bar.map(lambda k: (k, 0)), [_key(v, 0) for v in p], "linear", n, b)
    return r.tv, r.tolerance


def transfer_ks(n: int, b: int, samples: int, seed: int, shards: int = 1) -> tuple[float, float]:
    """Two-sample KS p-values for ``P`` and for the ``W`` combination."""
    p_lin, w_lin = simulate_linear(n, b - 2, samples, seed, shards)
    s = simulate_bary(n - 1, b, _transfer_sampler(b), samples, seed, shards)
    ks_p = stats.ks_2samp(p_lin, s.path_length + (n - 1)).pvalue
    ks_w = stats.ks_2samp(w_lin, s.wiener - s.path_length + (n - 1) ** 2).pvalue
    return float(ks_p), float(ks_w)
