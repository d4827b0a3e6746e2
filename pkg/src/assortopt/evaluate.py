"""Out-of-sample evaluation and the desk-scale benchmark harness.

The central quantity is the *approximation gap*: the revenue an assortment
earns on an independent validation sample set, divided by the in-sample
training optimum, as a percentage.  The training optimum is upward biased
while the validation estimate is unbiased, so the reported percentage is a
lower-bound estimate of the assortment's true optimality ratio.  An
optional correction divides by the validation set's own optimum instead
(off by default).

The benchmark harness reruns the synthetic generation pipeline across
settings and replications, timing formulation builds and solves; all
timings use the monotonic wall clock and are reported, never asserted.
"""

from __future__ import annotations

import csv
import json
import time
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from .backend import BuiltinBackend
from .benders import solve_two_phase
from .formulations import build_base_mip, build_exclusion_sets, build_xset_mip
from .model import Instance, RankingModel, check_assortment, rankings_from_samples
from .oracle import enumerate_optimal
from .sampler import make_synthetic_instance, stream_rng

__all__ = [
    "BenchmarkConfig",
    "BenchmarkSetting",
    "GapReport",
    "approximation_gap",
    "cross_validate",
    "run_benchmark",
    "solve_with_method",
    "write_benchmark_csv",
]


@dataclass(frozen=True)
class GapReport:
    """Training optimum, validation revenue, and their ratio in percent."""

    training_objective: float
    validation_revenue: float
    gap_percent: float
    corrected_gap_percent: Optional[float] = None

    def __post_init__(self):
        if self.validation_revenue < 0:
            raise ValueError("validation revenue cannot be negative")


def approximation_gap(
    x: np.ndarray,
    validation_utilities: np.ndarray,
    instance: Instance,
    training_objective: float,
    validation_optimum: Optional[float] = None,
) -> GapReport:
    """Estimate the approximation gap of an assortment on held-out samples.

    Every validation row buys its highest-utility offered product; the mean
    revenue over rows is divided by the training optimum.  Pass the
    validation set's own optimum to also get the bias-corrected ratio.
    """
    x = check_assortment(x, instance.n_products, binary=True)
    util = np.asarray(validation_utilities, dtype=float)
    if util.ndim != 2 or util.shape[1] != instance.n_products + 1:
        raise ValueError("validation utilities have the wrong shape")
    if util.shape[0] == 0:
        raise ValueError("validation set is empty")
    if training_objective <= 0:
        raise ValueError("training objective must be positive")
    masked = np.where(x > 0.5, util, -np.inf)
    choice = masked.argmax(axis=1)
    revenue = float(instance.revenues[choice].mean())
    corrected = None
    if validation_optimum is not None:
        corrected = revenue / validation_optimum * 100.0
    return GapReport(
        training_objective=float(training_objective),
        validation_revenue=revenue,
        gap_percent=revenue / training_objective * 100.0,
        corrected_gap_percent=corrected,
    )


def solve_with_method(model: RankingModel, method: str, tolerance: float = 1e-6,
                      budget_equality: bool = False):
    """Solve one ranking model with a named method; returns (x, objective, info).

    ``info`` carries per-phase cut counts and seconds for the Benders
    method and stays empty for the others.
    """
    info: Dict[str, float] = {}
    if method == "enum":
        x, objective = enumerate_optimal(model, equality=budget_equality)
    elif method == "benders":
        report = solve_two_phase(model, epsilon=tolerance, budget_equality=budget_equality)
        x, objective = report.x, report.objective
        info = {
            "phase1_bound": report.phase1_bound,
            "phase1_cuts": report.phase1_cuts,
            "phase2_cuts": report.phase2_cuts,
            "phase1_seconds": report.phase1_seconds,
            "phase2_seconds": report.phase2_seconds,
        }
    elif method in ("base-mip", "xset-mip"):
        backend = BuiltinBackend()
        if method == "base-mip":
            program = build_base_mip(model, budget_equality)
        else:
            program = build_xset_mip(build_exclusion_sets(model), budget_equality)
        status, values, objective = backend.solve(backend.load(program))
        if status != "optimal":
            raise RuntimeError(f"{method} solve returned {status}")
        n = model.instance.n_products
        x = np.ones(n + 1)
        x[:n] = np.round(values[:n])
    else:
        raise ValueError(f"unknown method {method!r}")
    return x, float(objective), info


def cross_validate(
    utilities: np.ndarray,
    instance: Instance,
    folds: int = 5,
    seed: int = 0,
    method: str = "benders",
    tolerance: float = 1e-6,
) -> List[GapReport]:
    """K-fold hold-out evaluation over a fixed sample set.

    Rows are shuffled once, split into ``folds`` nearly equal parts, and
    each part in turn serves as the validation set for the assortment
    optimized on the remaining rows.
    """
    util = np.asarray(utilities, dtype=float)
    if folds < 2:
        raise ValueError("need at least two folds")
    if util.shape[0] < folds:
        raise ValueError("fewer sample rows than folds")
    order = stream_rng(seed, 3).permutation(util.shape[0])
    parts = np.array_split(order, folds)
    reports = []
    for f in range(folds):
        holdout = parts[f]
        train = np.concatenate([parts[g] for g in range(folds) if g != f])
        model = rankings_from_samples(util[train], instance)
        x, objective, _ = solve_with_method(model, method, tolerance)
        reports.append(approximation_gap(x, util[holdout], instance, objective))
    return reports


@dataclass(frozen=True)
class BenchmarkSetting:
    n: int
    m: int
    k_tilde: int
    rank_cutoff: int
    budget: Optional[int] = None


@dataclass(frozen=True)
class BenchmarkConfig:
    """What to run: one replication per entry of ``seeds``."""

    settings: Sequence[BenchmarkSetting]
    methods: Sequence[str] = ("build",)
    seeds: Sequence[int] = (0,)
    n_transactions: int = 25000
    inclusion_prob: float = 0.05
    tolerance: float = 1e-6


_NUMERIC = (
    "seconds",
    "objective",
    "phase1_cuts",
    "phase2_cuts",
    "phase1_seconds",
    "phase2_seconds",
    "base_vars",
    "base_rows",
    "xset_vars",
    "xset_rows",
    "var_ratio",
    "row_ratio",
)


def _benchmark_cell(model: RankingModel, setting: BenchmarkSetting, method: str,
                    tolerance: float) -> Dict[str, object]:
    row: Dict[str, object] = {
        "method": method,
        "n": setting.n,
        "m": setting.m,
        "k_tilde": setting.k_tilde,
        "rank_cutoff": setting.rank_cutoff,
        "budget": setting.budget,
    }
    start = time.monotonic()
    if method == "build":
        base = build_base_mip(model)
        xset = build_xset_mip(build_exclusion_sets(model))
        row["base_vars"] = len(base.variables)
        row["base_rows"] = len(base.constraints)
        row["xset_vars"] = len(xset.variables)
        row["xset_rows"] = len(xset.constraints)
        row["var_ratio"] = len(base.variables) / len(xset.variables)
        row["row_ratio"] = len(base.constraints) / len(xset.constraints)
    else:
        _, objective, info = solve_with_method(model, method, tolerance)
        row["objective"] = objective
        row.update(info)
    row["seconds"] = time.monotonic() - start
    return row


def run_benchmark(config: BenchmarkConfig) -> List[Dict[str, object]]:
    """Run every (setting, method) cell and average over the seed replications."""
    accum: Dict[tuple, List[Dict[str, object]]] = {}
    for setting in config.settings:
        for seed in config.seeds:
            model, _, _ = make_synthetic_instance(
                n=setting.n,
                m=setting.m,
                rank_cutoff=setting.rank_cutoff,
                k_tilde=setting.k_tilde,
                seed=seed,
                budget=setting.budget,
                n_transactions=config.n_transactions,
                inclusion_prob=config.inclusion_prob,
            )
            for method in config.methods:
                cell = _benchmark_cell(model, setting, method, config.tolerance)
                accum.setdefault((setting, method), []).append(cell)

    rows = []
    for (setting, method), cells in accum.items():
        out = dict(cells[0])
        for key in _NUMERIC:
            values = [c[key] for c in cells if key in c]
            if values:
                out[key] = float(np.mean(values))
        out["replications"] = len(cells)
        rows.append(out)
    return rows


def write_benchmark_csv(rows: List[Dict[str, object]], path) -> None:
    columns = ["method", "n", "m", "k_tilde", "rank_cutoff", "budget", "replications"]
    columns += [k for k in _NUMERIC if any(k in r for r in rows)]
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def write_benchmark_json(rows: List[Dict[str, object]], path) -> None:
    with open(path, "w") as fh:
        json.dump(rows, fh, indent=2, default=str)
        fh.write("\n")
