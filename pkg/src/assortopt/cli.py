"""Command-line surface: generate, solve, evaluate, benchmark, cuts-debug.

Every subcommand reads/writes machine-readable JSON (instances use the
schema documented in the README) and prints a short human-readable summary.
Exit codes: 0 on success, 2 on invalid input, 3 on solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from typing import Optional

import numpy as np

from . import evaluate as ev
from .cuts import cut_coefficients, is_pareto_candidate, j_value, pareto_transform, phase1_cut, phase2_cut
from .model import load_instance, save_instance
from .oracle import InfeasibleError, UnboundedError
from .sampler import MnlCutoffModel, make_synthetic_instance, sample_utilities

__all__ = ["main"]

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_SOLVER_FAILURE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="assortopt",
        description="Assortment optimization under ranking-based choice models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="generate a synthetic instance")
    gen.add_argument("--n", type=int, required=True, help="number of products")
    gen.add_argument("--m", type=int, required=True, help="ground-truth ranking count")
    gen.add_argument("--cutoff", type=int, required=True, help="rank cutoff L")
    gen.add_argument("--samples", type=int, required=True, help="training sample count")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--budget", type=int, default=None)
    gen.add_argument("--transactions", type=int, default=25000, help="MLE transaction count")
    gen.add_argument("--inclusion", type=float, default=0.05, help="assortment inclusion probability")
    gen.add_argument("--out", required=True, help="instance JSON path")
    gen.add_argument("--truth", default=None, help="ground-truth sidecar path (default: <out>.truth.json)")

    slv = sub.add_parser("solve", help="solve an instance file")
    slv.add_argument("instance", help="instance JSON path")
    slv.add_argument("--method", choices=["benders", "base-mip", "xset-mip", "enum"], default="benders")
    slv.add_argument("--budget", type=int, default=None, help="override the instance budget")
    slv.add_argument("--budget-equality", action="store_true", help="require exactly budget products")
    slv.add_argument("--tol", type=float, default=1e-6)
    slv.add_argument("--out", default=None, help="report JSON path")

    evl = sub.add_parser("evaluate", help="estimate the out-of-sample approximation gap")
    evl.add_argument("instance", help="instance JSON path")
    evl.add_argument("--truth", required=True, help="ground-truth sidecar from `generate`")
    evl.add_argument("--method", choices=["benders", "base-mip", "xset-mip", "enum"], default="benders")
    evl.add_argument("--k-validation", type=int, default=10000, help="validation sample count")
    evl.add_argument("--folds", type=int, nargs="?", const=5, default=None,
                     help="cross-validate on the training samples instead (default 5 folds)")
    evl.add_argument("--bias-corrected", action="store_true",
                     help="also divide by the validation set's own optimum")
    evl.add_argument("--tol", type=float, default=1e-6)
    evl.add_argument("--out", default=None, help="report JSON path")

    ben = sub.add_parser("benchmark", help="run the desk-scale benchmark")
    ben.add_argument("--n", type=int, default=50)
    ben.add_argument("--m", type=int, default=5)
    ben.add_argument("--cutoff", type=int, default=5)
    ben.add_argument("--samples", type=int, default=5000)
    ben.add_argument("--budget", type=int, default=None)
    ben.add_argument("--methods", default="build",
                     help="comma list of build,enum,benders,base-mip,xset-mip")
    ben.add_argument("--replications", type=int, default=1)
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--transactions", type=int, default=25000)
    ben.add_argument("--out", default=None, help="output prefix; writes <prefix>.csv and <prefix>.json")

    dbg = sub.add_parser("cuts-debug", help="trace cut generation for one ranking")
    dbg.add_argument("instance", help="instance JSON path")
    dbg.add_argument("--ranking", type=int, required=True, help="zero-based ranking index")
    dbg.add_argument("--x", required=True,
                     help="comma list of N entries in [0,1]; no-purchase is implied")
    return parser


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _cmd_generate(args) -> int:
    model, mnl, ground = make_synthetic_instance(
        n=args.n,
        m=args.m,
        rank_cutoff=args.cutoff,
        k_tilde=args.samples,
        seed=args.seed,
        budget=args.budget,
        n_transactions=args.transactions,
        inclusion_prob=args.inclusion,
    )
    save_instance(model, args.out)
    truth_path = args.truth or args.out + ".truth.json"
    sidecar = {
        "attraction": [float(v) for v in mnl.attraction],
        "rank_cutoff": mnl.rank_cutoff,
        "revenues": [float(v) for v in mnl.revenues],
        "seed": args.seed,
        "k_tilde": args.samples,
        "m": args.m,
        "dropped_mass": model.dropped_mass,
    }
    with open(truth_path, "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(
        f"wrote {args.out} ({model.n_rankings} rankings from {args.samples} samples, "
        f"dropped mass {model.dropped_mass:.4f}) and {truth_path}"
    )
    return EXIT_OK


def _cmd_solve(args) -> int:
    model = load_instance(args.instance)
    if args.budget is not None:
        model = model.with_budget(args.budget)
    start = time.monotonic()
    x, objective, info = ev.solve_with_method(
        model, args.method, tolerance=args.tol, budget_equality=args.budget_equality
    )
    seconds = time.monotonic() - start
    assortment = [i + 1 for i in range(model.instance.n_products) if x[i] > 0.5]
    report = {
        "method": args.method,
        "objective": objective,
        "assortment": assortment,
        "x": [float(v) for v in x],
        "budget": model.instance.budget,
        "budget_equality": args.budget_equality,
        "tolerance": args.tol,
        "seconds": seconds,
    }
    report.update(info)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    print(f"{args.method}: objective {_fmt(objective)} with assortment {assortment} in {seconds:.3f}s")
    return EXIT_OK


def _load_truth(path) -> dict:
    with open(path) as fh:
        sidecar = json.load(fh)
    for key in ("attraction", "rank_cutoff", "revenues", "seed", "k_tilde"):
        if key not in sidecar:
            raise ValueError(f"ground-truth sidecar is missing {key!r}")
    return sidecar


def _cmd_evaluate(args) -> int:
    model = load_instance(args.instance)
    truth = _load_truth(args.truth)
    mnl = MnlCutoffModel(
        attraction=np.asarray(truth["attraction"], dtype=float),
        rank_cutoff=int(truth["rank_cutoff"]),
        revenues=np.asarray(truth["revenues"], dtype=float),
    )

    if args.folds is not None:
        train = sample_utilities(mnl, int(truth["k_tilde"]), int(truth["seed"]))
        reports = ev.cross_validate(
            train, model.instance, folds=args.folds, seed=int(truth["seed"]),
            method=args.method, tolerance=args.tol,
        )
        payload = {
            "mode": "cross-validation",
            "folds": args.folds,
            "gap_percent": [r.gap_percent for r in reports],
            "mean_gap_percent": float(np.mean([r.gap_percent for r in reports])),
        }
        print(f"{args.folds}-fold gap: {payload['mean_gap_percent']:.2f}% "
              f"(per fold: {', '.join(f'{g:.2f}' for g in payload['gap_percent'])})")
    else:
        x, objective, _ = ev.solve_with_method(model, args.method, tolerance=args.tol)
        validation = sample_utilities(mnl, args.k_validation, int(truth["seed"]) + 1_000_003)
        validation_optimum = None
        if args.bias_corrected:
            from .model import rankings_from_samples

            vmodel = rankings_from_samples(validation, model.instance)
            _, validation_optimum, _ = ev.solve_with_method(vmodel, args.method, tolerance=args.tol)
        report = ev.approximation_gap(x, validation, model.instance, objective, validation_optimum)
        payload = {
            "mode": "validation",
            "k_validation": args.k_validation,
            "training_objective": report.training_objective,
            "validation_revenue": report.validation_revenue,
            "gap_percent": report.gap_percent,
            "corrected_gap_percent": report.corrected_gap_percent,
        }
        print(f"gap: {report.gap_percent:.2f}% "
              f"(training {_fmt(report.training_objective)}, validation {_fmt(report.validation_revenue)})")

    if args.out:
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    return EXIT_OK


def _cmd_benchmark(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    config = ev.BenchmarkConfig(
        settings=[
            ev.BenchmarkSetting(
                n=args.n, m=args.m, k_tilde=args.samples,
                rank_cutoff=args.cutoff, budget=args.budget,
            )
        ],
        methods=methods,
        seeds=tuple(args.seed + rep for rep in range(args.replications)),
        n_transactions=args.transactions,
    )
    rows = ev.run_benchmark(config)
    for row in rows:
        bits = [f"{row['method']:<9}", f"N={row['n']}", f"K~={row['k_tilde']}"]
        if "var_ratio" in row:
            bits.append(f"base/xset vars {row['var_ratio']:.2f} rows {row['row_ratio']:.2f}")
        if "objective" in row and row["objective"] is not None:
            bits.append(f"objective {_fmt(row['objective'])}")
        bits.append(f"{row['seconds']:.3f}s")
        print("  ".join(str(b) for b in bits))
    if args.out:
        ev.write_benchmark_csv(rows, args.out + ".csv")
        ev.write_benchmark_json(rows, args.out + ".json")
        print(f"wrote {args.out}.csv and {args.out}.json")
    return EXIT_OK


def _cmd_cuts_debug(args) -> int:
    model = load_instance(args.instance)
    inst = model.instance
    if not 0 <= args.ranking < model.n_rankings:
        raise ValueError(f"ranking index must lie in [0, {model.n_rankings - 1}]")
    ranking = model.rankings[args.ranking]
    entries = [float(v) for v in args.x.split(",")]
    if len(entries) != inst.n_products:
        raise ValueError(f"--x needs {inst.n_products} comma-separated entries")
    x = np.append(np.asarray(entries), 1.0)

    binary = all(v in (0.0, 1.0) for v in entries)
    delta = phase2_cut(x, ranking, inst) if binary else phase1_cut(x, ranking, inst)
    transformed = pareto_transform(delta)

    def flag_line(tag, d):
        _, violated = is_pareto_candidate(d)
        flags = " ".join(f"P{i}={'violated' if f'P{i}' in violated else 'ok'}" for i in range(1, 5))
        return f"properties-{tag} {flags}"

    cut = cut_coefficients(transformed, args.ranking)
    print(f"ranking {args.ranking} prefix {','.join(map(str, ranking.prefix))} "
          f"lambda {_fmt(ranking.probability)}")
    print(f"x {','.join(_fmt(v) for v in entries)} ({'binary' if binary else 'fractional'})")
    print(f"delta-raw {','.join(_fmt(v) for v in delta.delta)}")
    print(flag_line("raw", delta))
    print(f"delta-pareto {','.join(_fmt(v) for v in transformed.delta)}")
    print(flag_line("pareto", transformed))
    terms = " ".join(f"{'+' if c >= 0 else '-'} {_fmt(abs(c))}*x{i}" for i, c in sorted(cut.coeffs.items()))
    print(f"cut q <= {_fmt(cut.intercept)} {terms}".rstrip())
    print(f"value-at-x {_fmt(j_value(x, transformed))}")
    return EXIT_OK


_COMMANDS = {
    "generate": _cmd_generate,
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "benchmark": _cmd_benchmark,
    "cuts-debug": _cmd_cuts_debug,
}


def main(argv: Optional[list] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_INPUT
    except (RuntimeError, InfeasibleError, UnboundedError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER_FAILURE


if __name__ == "__main__":
    sys.exit(main())
