"""Solver-agnostic math programs for ranking-based assortment optimization.

Two mixed-integer formulations are built here.  The *base* formulation keeps
one purchase variable per (ranking, prefix position); its size grows
linearly in the number of rankings.  The *exclusion-set* formulation
aggregates rankings that share the same unordered set of most preferred
products: for each such set ``E`` a single variable ``z_E`` encodes whether
any product of ``E`` is offered, and a customer buys the continuation
product ``i`` of ``E`` exactly when all of ``E`` is excluded and ``i`` is
offered.  Aggregation makes the program both smaller (when rankings collide)
and at least as tight in the LP relaxation, which the test suite checks
against the base formulation.

Programs are immutable descriptions (variables, linear rows, max objective)
with tags mapping back to the modeling entities; backends consume them via
:mod:`assortopt.backend`.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np

from .model import RankingModel

__all__ = [
    "Constraint",
    "ExclusionModel",
    "MathProgram",
    "Variable",
    "build_base_mip",
    "build_exclusion_sets",
    "build_xset_mip",
    "lp_relaxation",
    "write_lp",
]


@dataclass(frozen=True)
class Variable:
    tag: tuple
    name: str
    lower: float
    upper: float
    integer: bool


@dataclass(frozen=True)
class Constraint:
    name: str
    coeffs: Dict[int, float]  # variable index -> coefficient
    sense: str  # "<=", ">=", "=="
    rhs: float
    family: str  # size accounting: which structural family the row belongs to


@dataclass(frozen=True)
class MathProgram:
    """An immutable linear program with optional integrality, sense max."""

    variables: Tuple[Variable, ...]
    constraints: Tuple[Constraint, ...]
    objective: Dict[int, float]
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        tags = [v.tag for v in self.variables]
        if len(set(tags)) != len(tags):
            raise ValueError("variable tags must be unique")
        n = len(self.variables)
        for row in self.constraints:
            if any(not 0 <= j < n for j in row.coeffs):
                raise ValueError(f"row {row.name} references undeclared variables")
        if any(not 0 <= j < n for j in self.objective):
            raise ValueError("objective references undeclared variables")

    @property
    def is_mip(self) -> bool:
        return any(v.integer for v in self.variables)

    def var_index(self, tag: tuple) -> int:
        for j, v in enumerate(self.variables):
            if v.tag == tag:
                return j
        raise KeyError(f"no variable tagged {tag}")

    def size_summary(self) -> Dict[str, int]:
        """Counts of variables by tag kind and rows by structural family."""
        out: Dict[str, int] = {"variables": len(self.variables), "rows": len(self.constraints)}
        for v in self.variables:
            key = f"{v.tag[0]}_vars"
            out[key] = out.get(key, 0) + 1
        for row in self.constraints:
            key = f"{row.family}_rows"
            out[key] = out.get(key, 0) + 1
        return out


@dataclass(frozen=True)
class ExclusionModel:
    """Exclusion sets, continuation pairs, and their probability weights.

    ``sets`` holds every unordered set of the ``L`` most preferred products
    across rankings (for ``L`` from 0 to the full prefix), as canonically
    sorted tuples.  ``pairs`` holds ``(E, i, weight)`` where ``i`` is the
    product purchased when everything in ``E`` is excluded, and ``weight``
    sums the probabilities of the rankings that realize the pair.
    """

    model: RankingModel
    sets: Tuple[Tuple[int, ...], ...]
    pairs: Tuple[Tuple[Tuple[int, ...], int, float], ...]

    def __post_init__(self):
        members = set(self.sets)
        if () not in members:
            raise ValueError("the empty exclusion set must be present")
        total_first = 0.0
        for E, i, w in self.pairs:
            if E not in members:
                raise ValueError(f"pair references unknown set {E}")
            if i in E:
                raise ValueError(f"continuation {i} already inside {E}")
            if tuple(sorted(E + (i,))) not in members:
                raise ValueError(f"extended set for pair ({E}, {i}) missing")
            if w <= 0.0:
                raise ValueError("pair weights must be positive")
            if not E:
                total_first += w
        lam_sum = sum(rk.probability for rk in self.model.rankings)
        if abs(total_first - lam_sum) > 1e-9:
            raise ValueError("first-choice weights must sum to the total ranking mass")
        total_len = sum(rk.length for rk in self.model.rankings)
        if not len(self.sets) - 1 <= len(self.pairs) <= total_len:
            raise ValueError("pair count outside its structural bounds")

    @property
    def n_sets(self) -> int:
        return len(self.sets)

    @property
    def n_pairs(self) -> int:
        return len(self.pairs)


def build_exclusion_sets(model: RankingModel) -> ExclusionModel:
    """Collect exclusion sets and continuation pairs from all rankings.

    Weights are accumulated in ranking order, so repeated builds are
    deterministic; rankings whose first ``L`` products coincide collide on
    the same set and shrink the downstream program.
    """
    sets: Dict[Tuple[int, ...], None] = {(): None}
    weights: Dict[Tuple[Tuple[int, ...], int], float] = {}
    order: List[Tuple[Tuple[int, ...], int]] = []
    for rk in model.rankings:
        for depth in range(rk.length):
            E = tuple(sorted(rk.prefix[:depth]))
            nxt = rk.prefix[depth]
            key = (E, nxt)
            if key not in weights:
                weights[key] = 0.0
                order.append(key)
            weights[key] += rk.probability
            sets.setdefault(tuple(sorted(rk.prefix[: depth + 1])), None)
    pairs = tuple((E, i, weights[(E, i)]) for E, i in order)
    return ExclusionModel(model=model, sets=tuple(sets.keys()), pairs=pairs)


def _budget_row(model: RankingModel, x_index: Dict[int, int], equality: bool) -> Optional[Constraint]:
    budget = model.instance.budget
    if budget is None:
        return None
    return Constraint(
        name="budget",
        coeffs={x_index[i]: 1.0 for i in range(1, model.instance.n_products + 1)},
        sense="==" if equality else "<=",
        rhs=float(budget),
        family="budget",
    )


def build_base_mip(model: RankingModel, budget_equality: bool = False) -> MathProgram:
    """Per-ranking purchase-position formulation.

    One binary variable per product plus one continuous purchase variable
    per (ranking, prefix position); each ranking buys at most one prefix
    product, offering a product forces a purchase at or above its position,
    and purchases require the product to be offered.
    """
    inst = model.instance
    n = inst.n_products
    variables: List[Variable] = [
        Variable(("x", i), f"x{i}", 0.0, 1.0, True) for i in range(1, n + 1)
    ]
    x_index = {i: i - 1 for i in range(1, n + 1)}
    objective: Dict[int, float] = {}
    constraints: List[Constraint] = []

    for k, rk in enumerate(model.rankings):
        y_index = []
        for pos, i in enumerate(rk.prefix, start=1):
            y_index.append(len(variables))
            variables.append(Variable(("y", k, pos), f"y{k}_{pos}", 0.0, np.inf, False))
            objective[y_index[-1]] = rk.probability * float(inst.revenues[i - 1])
        constraints.append(
            Constraint(
                name=f"choose{k}",
                coeffs={j: 1.0 for j in y_index},
                sense="<=",
                rhs=1.0,
                family="choose",
            )
        )
        for pos, i in enumerate(rk.prefix, start=1):
            row = {y_index[p]: -1.0 for p in range(pos)}
            row[x_index[i]] = 1.0
            constraints.append(
                Constraint(name=f"pushup{k}_{pos}", coeffs=row, sense="<=", rhs=0.0, family="pushup")
            )
        for pos, i in enumerate(rk.prefix, start=1):
            constraints.append(
                Constraint(
                    name=f"link{k}_{pos}",
                    coeffs={y_index[pos - 1]: 1.0, x_index[i]: -1.0},
                    sense="<=",
                    rhs=0.0,
                    family="link",
                )
            )

    budget = _budget_row(model, x_index, budget_equality)
    if budget is not None:
        constraints.append(budget)
    return MathProgram(
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=objective,
        meta={"kind": "base", "model": model},
    )


def build_xset_mip(exclusion: ExclusionModel, budget_equality: bool = False) -> MathProgram:
    """Exclusion-set formulation over aggregated prefix sets.

    For each pair ``(E, i)``: the increment ``z_{E + i} - z_E`` is pinned
    between 0 and ``x_i``, and offering ``i`` forces ``z_{E + i}`` on.  The
    objective pays the pair's revenue exactly when the increment is 1, i.e.
    when all of ``E`` is excluded and ``i`` is offered.
    """
    model = exclusion.model
    inst = model.instance
    n = inst.n_products
    variables: List[Variable] = [
        Variable(("x", i), f"x{i}", 0.0, 1.0, True) for i in range(1, n + 1)
    ]
    x_index = {i: i - 1 for i in range(1, n + 1)}
    z_index: Dict[Tuple[int, ...], int] = {}
    for E in exclusion.sets:
        z_index[E] = len(variables)
        name = "zE" + "_".join(str(i) for i in E) if E else "zE"
        variables.append(Variable(("z", E), name, 0.0, np.inf, False))

    objective: Dict[int, float] = {}
    constraints: List[Constraint] = []
    for E, i, w in exclusion.pairs:
        up = z_index[tuple(sorted(E + (i,)))]
        lo = z_index[E]
        gain = w * float(inst.revenues[i - 1])
        objective[up] = objective.get(up, 0.0) + gain
        objective[lo] = objective.get(lo, 0.0) - gain
        tagE = "_".join(str(j) for j in E)
        constraints.append(
            Constraint(
                name=f"mono_{tagE}_{i}",
                coeffs={up: 1.0, lo: -1.0},
                sense=">=",
                rhs=0.0,
                family="pair_lower",
            )
        )
        constraints.append(
            Constraint(
                name=f"step_{tagE}_{i}",
                coeffs={up: 1.0, lo: -1.0, x_index[i]: -1.0},
                sense="<=",
                rhs=0.0,
                family="pair_upper",
            )
        )
        constraints.append(
            Constraint(
                name=f"force_{tagE}_{i}",
                coeffs={x_index[i]: 1.0, up: -1.0},
                sense="<=",
                rhs=0.0,
                family="continuation",
            )
        )
    for E in exclusion.sets:
        constraints.append(
            Constraint(
                name="cap_" + "_".join(str(j) for j in E),
                coeffs={z_index[E]: 1.0},
                sense="<=",
                rhs=1.0,
                family="cap",
            )
        )
    constraints.append(
        Constraint(name="root", coeffs={z_index[()]: 1.0}, sense="==", rhs=0.0, family="root")
    )

    # drop all-zero objective entries introduced by cancellation
    objective = {j: c for j, c in objective.items() if c != 0.0}

    budget = _budget_row(model, x_index, budget_equality)
    if budget is not None:
        constraints.append(budget)
    return MathProgram(
        variables=tuple(variables),
        constraints=tuple(constraints),
        objective=objective,
        meta={"kind": "xset", "exclusion": exclusion},
    )


def lp_relaxation(program: MathProgram) -> MathProgram:
    """Copy with integrality dropped; bounds are kept, so relax is idempotent."""
    return replace(
        program,
        variables=tuple(replace(v, integer=False) for v in program.variables),
    )


def _fmt(value: float) -> str:
    text = f"{value:.17g}"
    return text


def _row_terms(coeffs: Dict[int, float], variables: Tuple[Variable, ...]) -> str:
    parts = []
    for j in sorted(coeffs):
        c = coeffs[j]
        if c == 0.0:
            continue
        sign = "-" if c < 0 else "+"
        mag = _fmt(abs(c))
        parts.append(f"{sign} {mag} {variables[j].name}")
    if not parts:
        return "0 " + variables[0].name
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


def write_lp(program: MathProgram, path) -> None:
    """Export to LP-format text with byte-stable ordering.

    Sections: objective, rows, bounds, generals.  Variables appear in
    declaration order and rows in construction order, so identical programs
    serialize identically.
    """
    lines = ["\\ assortment optimization export", "Maximize"]
    lines.append(" obj: " + _row_terms(program.objective, program.variables))
    lines.append("Subject To")
    sense_text = {"<=": "<=", ">=": ">=", "==": "="}
    for row in program.constraints:
        lines.append(
            f" {row.name}: "
            + _row_terms(row.coeffs, program.variables)
            + f" {sense_text[row.sense]} {_fmt(row.rhs)}"
        )
    lines.append("Bounds")
    for v in program.variables:
        if np.isinf(v.upper) and v.lower == 0.0:
            continue  # default bound
        if np.isinf(v.upper):
            lines.append(f" {v.name} >= {_fmt(v.lower)}")
        else:
            lines.append(f" {_fmt(v.lower)} <= {v.name} <= {_fmt(v.upper)}")
    generals = [v.name for v in program.variables if v.integer]
    if generals:
        lines.append("Generals")
        lines.append(" " + " ".join(generals))
    lines.append("End")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
