"""Command line entry point: ``treetails <subcommand> [options]``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import asdict, fields

import numpy as np
from scipy import stats

from . import harness
from .exact_engine import enumerate_bary, enumerate_linear, expectations
from .harness import ConfigError, ExperimentConfig
from .numerics import constants
from .recursion_core import estimate_d_bound, sample_root_splits, toll_summary
from .tail_bounds import PiecewiseBound, chernoff_optimize
from .tree_models import WeightSampler
from .urn_domination import check_domination, check_domination_range, coupled_runs, plain_urn_counts

EXIT_OK = 0
EXIT_VIOLATION = 1
EXIT_USAGE = 2


def _emit(rows: list[dict], args, meta: dict | None = None) -> None:
    if args.format == "json":
        harness.write_text(harness.to_json({"meta": meta or {}, "rows": rows}), args.out)
    else:
        harness.write_text(harness.rows_to_csv(rows), args.out)


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    overrides = {f.name: getattr(args, f.name, None) for f in fields(ExperimentConfig)}
    if getattr(args, "t_grid", None) is not None:
        overrides["t_grid"] = tuple(args.t_grid)
    return cfg.override(**overrides)


def cmd_constants(args) -> int:
    c = constants(args.tolerance)
    _emit([c.as_dict()], args)
    return EXIT_OK


def cmd_bound(args) -> int:
    bound = PiecewiseBound(args.d)
    grid = args.t if args.t else harness.default_t_grid(bound)
    rows = []
    for t in grid:
        t = float(t)
        sol = chernoff_optimize(t, bound) if t > 0 else None
        rows.append({
            "t": t,
            "piece": bound.piece(t),
            "bound": bound.value(t),
            "log_bound": bound.log_value(t),
            "chernoff_u": sol.u_star if sol else 0.0,
            "regime": sol.regime if sol else "none",
        })
    _emit(rows, args, {"table": bound.table()})
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    p, w = harness.simulate(cfg)
    rows = [{"index": i, "path_length": float(a), "wiener": float(c)} for i, (a, c) in enumerate(zip(p, w))]
    _emit(rows, args, {"config": cfg.to_dict()})
    return EXIT_OK


def cmd_tails(args) -> int:
    cfg = _config(args)
    report = harness.run_tails(cfg)
    harness.write_tail_report(report, args.out, args.format)
    if not report.ok:
        print(f"tail bound breached at {len(report.breaches)} rows", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_toll(args) -> int:
    sampler = WeightSampler.parse(args.weights, args.b)
    table = expectations(args.n_max, args.b, sampler.mu)
    est = estimate_d_bound(args.b, sampler, args.n_max, args.samples, seed=args.seed or 0,
                           safety=args.safety, table=table)
    split, z = sample_root_splits(args.n_max, args.b, sampler, args.samples, args.seed or 0)
    summary = toll_summary(split, z, args.n_max, args.b, table)
    row = {"d_bound": est.value, "raw_max": est.raw_max, "argmax_n": est.argmax_n, "safety": est.safety,
           "n": summary["n"], "max_norm_at_n": summary["max_norm"],
           "mean_w": summary["mean"][0], "mean_p": summary["mean"][1]}
    _emit([row], args, {"provenance": est.provenance, "summary": summary})
    return EXIT_OK


def cmd_oracle(args) -> int:
    if args.model == "linear":
        pmf = enumerate_linear(args.n, args.beta)
    else:
        pmf = enumerate_bary(args.n, args.b, WeightSampler.parse(args.weights, args.b)).functionals
    rows = [{"path_length": float(k[0]), "wiener": float(k[1]), "prob": float(p), "exact": str(p)}
            for k, p in sorted(pmf.probs.items())]
    _emit(rows, args)
    return EXIT_OK


def cmd_expectations(args) -> int:
    mu = WeightSampler.parse(args.weights, args.b).mu
    table = expectations(args.n_max, args.b, mu)
    rows = [{"n": n, "EP": ep, "EW": ew} for n, ep, ew in table.rows()]
    _emit(rows, args, {"b": args.b, "mu": mu})
    return EXIT_OK


def cmd_dominate(args) -> int:
    if args.all:
        reports = check_domination_range(args.n, args.b, args.grid)
    else:
        reports = [check_domination(args.n, args.b, args.grid)]
    rows = []
    for r in reports:
        d = asdict(r)
        d.pop("extra")
        d["first_violation"] = "" if r.first_violation is None else r.first_violation
        d["ok"] = r.ok
        rows.append(d)
    _emit(rows, args)
    bad = [r for r in reports if not r.ok]
    if bad:
        print(f"domination violated: b={bad[0].b} n={bad[0].n} v={bad[0].first_violation}", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_couple(args) -> int:
    seed = args.seed or 0
    s = coupled_runs(args.n, args.b, args.runs, seed, args.shards or 1)
    plain = plain_urn_counts(args.n, args.b, args.runs, seed)
    ks = stats.ks_2samp(s.final_j[:, 0], plain[:, 0]).pvalue
    row = {"n": args.n, "b": args.b, "runs": args.runs, "violations": s.violations,
           "ks_pvalue_j1": float(ks), "mean_j1": float(np.mean(s.final_j[:, 0])),
           "mean_i1": float(np.mean(s.final_i[:, 0])), "ordered": s.violations == 0}
    _emit([row], args)
    if s.violations:
        print(f"coupling ordering violated {s.violations} times", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def cmd_gof(args) -> int:
    report = harness.run_gof(_config(args))
    _emit([report.row()], args)
    return EXIT_OK if report.ok else EXIT_VIOLATION


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    p.add_argument("--shards", type=int, default=argparse.SUPPRESS)
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=argparse.SUPPRESS)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON file with ExperimentConfig fields")
    return p


def _model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", choices=("bary", "linear"))
    p.add_argument("--b", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--weights", help="unit | perm:v1,...,vb | const:v,...,v")


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="treetails", parents=[common],
                                     description="Tail bounds for path length and Wiener index of random trees.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", parents=[common], help="solve for gamma and L0")
    p.add_argument("--tolerance", type=float, default=1e-15)
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("bound", parents=[common], help="tabulate the five-piece tail bound")
    p.add_argument("--d", type=float, default=1.0, help="toll bound D")
    p.add_argument("--t", type=float, nargs="*")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("simulate", parents=[common], help="simulate trees, one row per sample")
    _model_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tails", parents=[common], help="empirical tails against the bound")
    _model_args(p)
    p.add_argument("--d-bound", dest="d_bound", help="number or 'estimate'")
    p.add_argument("--d-estimate-n-max", dest="d_estimate_n_max", type=int)
    p.add_argument("--d-estimate-samples", dest="d_estimate_samples", type=int)
    p.add_argument("--t-grid", dest="t_grid", type=float, nargs="+")
    p.add_argument("--t-points", dest="t_points", type=int)
    p.set_defaults(func=cmd_tails)

    p = sub.add_parser("toll", parents=[common], help="estimate the toll bound D")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--weights", default="unit")
    p.add_argument("--n-max", dest="n_max", type=int, default=500)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--safety", type=float, default=1.1)
    p.set_defaults(func=cmd_toll)

    p = sub.add_parser("oracle", parents=[common], help="exact law of (P, W) by enumeration")
    p.add_argument("--model", choices=("bary", "linear"), default="bary")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--weights", default="unit")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("expectations", parents=[common], help="E[P_n] and E[W_n] table")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--weights", default="unit")
    p.add_argument("--n-max", dest="n_max", type=int, default=100)
    p.set_defaults(func=cmd_expectations)

    p = sub.add_parser("dominate", parents=[common], help="exact domination check of the operator-norm sum")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--all", action="store_true", help="check every size up to n")
    p.add_argument("--grid", type=int, default=10_000)
    p.set_defaults(func=cmd_dominate)

    p = sub.add_parser("couple", parents=[common], help="coupled urn runs")
    p.add_argument("--b", type=int, default=2)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--runs", type=int, default=10_000)
    p.set_defaults(func=cmd_couple)

    p = sub.add_parser("gof", parents=[common], help="simulator against exact enumeration")
    _model_args(p)
    p.set_defaults(func=cmd_gof)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    for name, default in (("seed", None), ("shards", None), ("out", None), ("format", None), ("config", None)):
        if not hasattr(args, name):
            setattr(args, name, default)
    if args.config:
        file_cfg = ExperimentConfig.load(args.config)
        for name in ("seed", "shards", "out", "format"):
            if getattr(args, name) is None:
                setattr(args, name, getattr(file_cfg, name))
    if args.format is None:
        args.format = "csv"
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
