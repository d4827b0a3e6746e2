"""Two-phase Benders decomposition with Pareto cuts.

The outer problem keeps the assortment variables plus one epigraph variable
``q_k`` per ranking bounded above by affine cuts; the weighted sum of the
``q_k`` is maximized.  Phase 1 runs constraint generation on the LP
relaxation: at each fractional solution, every ranking whose epigraph value
exceeds its true revenue bound by more than the tolerance receives the cut
obtained from :func:`assortopt.cuts.phase1_cut` followed by
:func:`assortopt.cuts.pareto_transform`.  Phase 2 re-solves with integrality
restored, warm-started with all Phase-1 rows, generating cuts from
:func:`assortopt.cuts.phase2_cut` at integer incumbents - through a lazy-cut
callback when the backend has one, otherwise by iterated re-solves.

Both phases add all violated cuts each round, deduplicate them by rounded
fingerprint, and touch rankings in index order, so runs are deterministic
for a deterministic backend.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .cuts import Cut, cut_coefficients, j_value, pareto_transform, phase1_cut, phase2_cut
from .formulations import Constraint, MathProgram, Variable, lp_relaxation
from .model import Instance, Ranking, RankingModel, revenue_of

__all__ = [
    "OuterState",
    "SolveReport",
    "initial_cut",
    "outer_program",
    "run_phase1",
    "run_phase2",
    "solve_two_phase",
]

DEFAULT_TOLERANCE = 1e-6

#: Hard ceiling on constraint-generation rounds; both phases converge after
#: finitely many rounds, so tripping this indicates a bug.
MAX_ROUNDS = 10_000


@dataclass
class OuterState:
    """Mutable driver state shared by the two phases."""

    model: RankingModel
    epsilon: float
    phase: str = "LP"
    pools: Dict[int, List[Cut]] = field(default_factory=dict)
    pool_keys: Dict[int, set] = field(default_factory=dict)
    phase1_cuts: int = 0
    phase2_cuts: int = 0
    phase1_iterations: int = 0
    phase2_iterations: int = 0
    phase1_bound: float = float("inf")

    def pool_cut(self, k: int, cut: Cut) -> bool:
        """Add to the pool unless an identical cut is already there."""
        keys = self.pool_keys.setdefault(k, set())
        if cut.key() in keys:
            return False
        keys.add(cut.key())
        self.pools.setdefault(k, []).append(cut)
        return True


@dataclass
class SolveReport:
    """Outcome of a two-phase solve."""

    x: np.ndarray
    objective: float
    phase1_bound: float
    phase1_cuts: int
    phase2_cuts: int
    phase1_seconds: float
    phase2_seconds: float
    phase1_iterations: int
    phase2_iterations: int

    def validate(self) -> None:
        if self.phase1_bound < self.objective - 1e-6:
            raise AssertionError(
                f"phase-1 bound {self.phase1_bound} below final objective {self.objective}"
            )


def initial_cut(ranking: Ranking, instance: Instance, ranking_index: int = 0) -> Cut:
    """Constant cut bounding a ranking's revenue by its best prefix revenue.

    Equals the cut generated by the all-constant dual vector at the top
    revenue; it exists purely to keep the outer problem bounded before any
    violated cuts are found.
    """
    return Cut(ranking_index=ranking_index, intercept=ranking.top_revenue(instance), coeffs={})


def outer_program(model: RankingModel, state: OuterState, budget_equality: bool = False) -> MathProgram:
    """Build the outer MIP over (x, q) with all currently pooled cuts."""
    inst = model.instance
    n = inst.n_products
    variables: List[Variable] = [
        Variable(("x", i), f"x{i}", 0.0, 1.0, True) for i in range(1, n + 1)
    ]
    q_index: Dict[int, int] = {}
    for k in range(model.n_rankings):
        q_index[k] = len(variables)
        variables.append(Variable(("q", k), f"q{k}", 0.0, np.inf, False))
    objective = {q_index[k]: rk.probability for k, rk in enumerate(model.rankings)}

    constraints: List[Constraint] = []
    for k in range(model.n_rankings):
        for c_idx, cut in enumerate(state.pools.get(k, [])):
            constraints.append(_cut_row(cut, k, q_index[k], f"cut{k}_{c_idx}"))
    if inst.budget is not None:
        constraints.append(
            Constraint(
                name="budget",
                coeffs={i - 1: 1.0 for i in range(1, n + 1)},
                sense="==" if budget_equality else "<=",
                rhs=float(inst.budget),
                family="budget",
            )
        )
    return MathProgram(
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=objective,
        meta={"kind": "outer", "model": model},
    )


def _cut_row(cut: Cut, k: int, q_col: int, name: str) -> Constraint:
    coeffs = {q_col: 1.0}
    for i, c in cut.coeffs.items():
        if c != 0.0:
            coeffs[i - 1] = -c
    return Constraint(name=name, coeffs=coeffs, sense="<=", rhs=cut.intercept, family="cut")


def _extract(model: RankingModel, handle, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = model.instance.n_products
    x = np.ones(n + 1)
    # scrub LP roundoff so downstream [0,1] validation stays strict
    x[:n] = np.clip(values[:n], 0.0, 1.0)
    q = np.array([values[handle.var_index(("q", k))] for k in range(model.n_rankings)])
    return x, q


def _check_budget(model: RankingModel, budget_equality: bool) -> None:
    budget = model.instance.budget
    if budget is None:
        if budget_equality:
            raise ValueError("equality budget requested but the instance has no budget")
        return
    if budget_equality and budget > model.instance.n_products:
        raise ValueError(f"equality budget {budget} exceeds the number of products")


def run_phase1(
    model: RankingModel,
    backend=None,
    epsilon: float = DEFAULT_TOLERANCE,
    budget_equality: bool = False,
    state: Optional[OuterState] = None,
    pareto: bool = True,
) -> Tuple[np.ndarray, float, OuterState]:
    """Constraint generation on the LP relaxation of the outer problem.

    Returns the final fractional assortment, the LP bound, and the state
    whose pools hold every cut generated so far (initial cuts included).
    ``pareto=False`` skips the cut-strengthening transform; it exists only
    for benchmarking the transform's effect on cut counts.
    """
    if backend is None:
        from .backend import BuiltinBackend

        backend = BuiltinBackend()
    _check_budget(model, budget_equality)
    if state is None:
        state = OuterState(model=model, epsilon=epsilon)
    state.phase = "LP"
    for k, rk in enumerate(model.rankings):
        state.pool_cut(k, initial_cut(rk, model.instance, k))

    program = lp_relaxation(outer_program(model, state, budget_equality))
    handle = backend.load(program)
    inst = model.instance

    for round_no in range(MAX_ROUNDS):
        state.phase1_iterations += 1
        status, values, objective = backend.solve(handle)
        if status != "optimal":
            raise RuntimeError(f"phase 1 backend returned {status} on round {round_no}")
        x, q = _extract(model, handle, values)
        new_rows = []
        for k, rk in enumerate(model.rankings):
            delta = phase1_cut(x, rk, inst)
            best = j_value(x, delta)
            if q[k] > best + epsilon:
                if pareto:
                    delta = pareto_transform(delta)
                cut = cut_coefficients(delta, k)
                if state.pool_cut(k, cut):
                    state.phase1_cuts += 1
                    new_rows.append(
                        _cut_row(cut, k, handle.var_index(("q", k)), f"p1_{round_no}_{k}")
                    )
        if not new_rows:
            state.phase1_bound = objective
            return x, objective, state
        backend.add_rows(handle, new_rows)
    raise RuntimeError("phase 1 did not converge within the round limit")


def run_phase2(
    model: RankingModel,
    state: OuterState,
    backend=None,
    epsilon: float = DEFAULT_TOLERANCE,
    budget_equality: bool = False,
    pareto: bool = True,
) -> Tuple[np.ndarray, float, OuterState]:
    """Integer phase, warm-started with all pooled cuts.

    Uses the backend's lazy-cut callback when available; otherwise solves,
    checks the incumbent, adds violated cuts, and repeats.
    """
    if backend is None:
        from .backend import BuiltinBackend

        backend = BuiltinBackend()
    _check_budget(model, budget_equality)
    state.phase = "MIP"
    inst = model.instance
    program = outer_program(model, state, budget_equality)
    handle = backend.load(program)

    def violated_rows(values: np.ndarray) -> List[Constraint]:
        x, q = _extract(model, handle, values)
        rows = []
        for k, rk in enumerate(model.rankings):
            actual = revenue_of(x, rk, inst)
            if q[k] > actual + epsilon:
                delta = phase2_cut(x, rk, inst)
                if pareto:
                    delta = pareto_transform(delta)
                cut = cut_coefficients(delta, k)
                if not state.pool_cut(k, cut):
                    raise RuntimeError(
                        f"ranking {k}: pooled cut violated by {q[k] - actual:.3e} at an incumbent"
                    )
                state.phase2_cuts += 1
                rows.append(_cut_row(cut, k, handle.var_index(("q", k)), f"p2_{k}_{len(rows)}"))
        return rows

    def exact_objective(x: np.ndarray) -> float:
        # the epigraph values may sit up to epsilon above the revenue each
        # ranking actually earns, so report the incumbent's true value
        return sum(rk.probability * revenue_of(x, rk, inst) for rk in model.rankings)

    if backend.capabilities.supports_lazy_cuts:
        state.phase2_iterations += 1
        status, values, _ = backend.solve(handle, lazy_cut_source=violated_rows)
        if status != "optimal":
            raise RuntimeError(f"phase 2 backend returned {status}")
        x, _ = _extract(model, handle, values)
        return x, exact_objective(x), state

    for round_no in range(MAX_ROUNDS):
        state.phase2_iterations += 1
        status, values, _ = backend.solve(handle)
        if status != "optimal":
            raise RuntimeError(f"phase 2 backend returned {status} on round {round_no}")
        rows = violated_rows(values)
        if not rows:
            x, _ = _extract(model, handle, values)
            return x, exact_objective(x), state
        backend.add_rows(handle, rows)
    raise RuntimeError("phase 2 did not converge within the round limit")


def solve_two_phase(
    model: RankingModel,
    backend=None,
    epsilon: float = DEFAULT_TOLERANCE,
    budget_equality: bool = False,
    pareto: bool = True,
) -> SolveReport:
    """Run both phases and assemble a report.

    Deterministic whenever the backend is; the report's Phase-1 bound always
    dominates the final integer objective.
    """
    state = OuterState(model=model, epsilon=epsilon)
    t0 = time.monotonic()
    _, bound, state = run_phase1(model, backend, epsilon, budget_equality, state, pareto)
    t1 = time.monotonic()
    x, objective, state = run_phase2(model, state, backend, epsilon, budget_equality, pareto)
    t2 = time.monotonic()
    report = SolveReport(
        x=x,
        objective=objective,
        phase1_bound=bound,
        phase1_cuts=state.phase1_cuts,
        phase2_cuts=state.phase2_cuts,
        phase1_seconds=t1 - t0,
        phase2_seconds=t2 - t1,
        phase1_iterations=state.phase1_iterations,
        phase2_iterations=state.phase2_iterations,
    )
    report.validate()
    return report
