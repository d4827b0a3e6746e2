"""LP/MIP backends behind one small contract.

The Benders driver and the formulation solvers only ever call ``load``,
``solve``, and ``add_rows``, so any solver that implements those can be
plugged in.  Two backends ship with the library:

* :class:`BuiltinBackend` - no external dependencies.  LP solves go through
  the bundled dense simplex; integer solves enumerate assortments and set
  the continuous variables optimally in closed form (purchase variables pick
  the most preferred offered product, aggregated set variables become the
  max over their members, epigraph variables drop to their tightest cut).
  Exact for the product counts used in verification, deterministic, and it
  breaks objective ties toward the lexicographically smallest assortment.
* :class:`ExternalLpBackend` - file-based glue: writes LP format, invokes
  the executable named by the ``ASSORTOPT_SOLVER`` environment variable as
  ``solver model.lp solution.out``, and parses the solution file.  Both
  solution dialects described in the README are accepted.

A backend without native lazy-cut callbacks still honors a
``lazy_cut_source`` by re-solving until the source stops returning cuts,
which is semantically identical to callback installation, just slower.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .formulations import Constraint, MathProgram, write_lp
from .model import RankingModel
from .oracle import DenseLp, InfeasibleError, UnboundedError, simplex_solve

__all__ = [
    "BackendCapabilities",
    "BackendModel",
    "BuiltinBackend",
    "ExternalLpBackend",
    "SOLVER_ENV_VAR",
    "parse_solution_file",
]

SOLVER_ENV_VAR = "ASSORTOPT_SOLVER"

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

#: Most binary variables the enumerating fallback will accept.
FALLBACK_BINARY_CAP = 20

_TIE_TOL = 1e-9


@dataclass(frozen=True)
class BackendCapabilities:
    supports_lp: bool
    supports_mip: bool
    supports_lazy_cuts: bool
    name: str

    def __post_init__(self):
        if not (self.supports_lp or self.supports_mip):
            raise ValueError("a backend must support LPs or MIPs")


class BackendModel:
    """Opaque handle: the loaded program plus rows added after loading."""

    def __init__(self, program: MathProgram):
        self.program = program
        self.extra_rows: List[Constraint] = []
        self._index = {v.tag: j for j, v in enumerate(program.variables)}

    def var_index(self, tag: tuple) -> int:
        try:
            return self._index[tag]
        except KeyError:
            raise KeyError(f"no variable tagged {tag}") from None

    def all_rows(self) -> List[Constraint]:
        return list(self.program.constraints) + self.extra_rows


def _program_to_lp(handle: BackendModel) -> DenseLp:
    program = handle.program
    n = len(program.variables)
    rows = handle.all_rows()
    lhs = np.zeros((len(rows), n))
    rhs = np.zeros(len(rows))
    senses = []
    for r, row in enumerate(rows):
        for j, c in row.coeffs.items():
            lhs[r, j] = c
        rhs[r] = row.rhs
        senses.append(row.sense)
    obj = np.zeros(n)
    for j, c in program.objective.items():
        obj[j] = c
    return DenseLp(
        objective=obj,
        lhs=lhs,
        senses=tuple(senses),
        rhs=rhs,
        lower=np.array([v.lower for v in program.variables]),
        upper=np.array([v.upper for v in program.variables]),
    )


def _binary_tags(program: MathProgram) -> List[int]:
    idx = []
    for j, v in enumerate(program.variables):
        if v.integer:
            if not (v.lower == 0.0 and v.upper == 1.0):
                raise ValueError(f"integer variable {v.name} is not binary")
            idx.append(j)
    return idx


def _subset_matrix(n_bin: int) -> np.ndarray:
    masks = np.arange(1 << n_bin, dtype=np.int64)
    return ((masks[:, None] >> np.arange(n_bin)) & 1).astype(float)


def _rows_feasibility(rows, bin_cols: Sequence[int], X: np.ndarray) -> np.ndarray:
    """Feasibility mask over subsets for rows supported on binary vars only."""
    bin_set = set(bin_cols)
    ok = np.ones(X.shape[0], dtype=bool)
    for row in rows:
        if not set(row.coeffs) <= bin_set:
            continue
        lhs = X @ np.array([row.coeffs.get(j, 0.0) for j in bin_cols])
        if row.sense == "<=":
            ok &= lhs <= row.rhs + _TIE_TOL
        elif row.sense == ">=":
            ok &= lhs >= row.rhs - _TIE_TOL
        else:
            ok &= np.abs(lhs - row.rhs) <= _TIE_TOL
    return ok


def _ranking_revenue_table(model: RankingModel, X: np.ndarray, product_col: Dict[int, int]) -> np.ndarray:
    """Expected revenue per subset row of ``X`` under the ranking model."""
    rev = np.zeros(X.shape[0])
    inst = model.instance
    for rk in model.rankings:
        remaining = np.ones(X.shape[0], dtype=bool)
        gained = np.zeros(X.shape[0])
        for i in rk.prefix:
            hit = remaining & (X[:, product_col[i]] > 0.5)
            gained[hit] = inst.revenues[i - 1]
            remaining &= ~hit
        rev += rk.probability * gained
    return rev


class BuiltinBackend:
    """Exact fallback backend; see the module docstring for its methods."""

    def __init__(self, mip: bool = True, binary_cap: int = FALLBACK_BINARY_CAP):
        self.capabilities = BackendCapabilities(
            supports_lp=True, supports_mip=mip, supports_lazy_cuts=False, name="builtin"
        )
        self.binary_cap = binary_cap

    def load(self, program: MathProgram) -> BackendModel:
        if program.is_mip and not self.capabilities.supports_mip:
            raise ValueError("this backend only supports LPs; relax the program first")
        return BackendModel(program)

    def add_rows(self, handle: BackendModel, rows: Sequence[Constraint]) -> None:
        n = len(handle.program.variables)
        for row in rows:
            if any(not 0 <= j < n for j in row.coeffs):
                raise KeyError(f"row {row.name} references an unknown variable id")
        handle.extra_rows.extend(rows)

    def solve(
        self,
        handle: BackendModel,
        lazy_cut_source: Optional[Callable[[np.ndarray], Sequence[Constraint]]] = None,
    ) -> Tuple[str, Optional[np.ndarray], float]:
        """Solve to optimality; returns (status, variable values, objective).

        With a ``lazy_cut_source``, the source is queried at each incumbent
        and any returned rows are installed before the incumbent can be
        accepted (emulated here by iterated re-solves).
        """
        while True:
            status, values, objective = self._solve_once(handle)
            if status != OPTIMAL or lazy_cut_source is None:
                return status, values, objective
            new_rows = list(lazy_cut_source(values))
            if not new_rows:
                return status, values, objective
            self.add_rows(handle, new_rows)

    # -- internals ---------------------------------------------------------

    def _solve_once(self, handle: BackendModel):
        program = handle.program
        if not program.is_mip:
            try:
                value, point = simplex_solve(_program_to_lp(handle))
            except InfeasibleError:
                return INFEASIBLE, None, float("nan")
            except UnboundedError:
                return UNBOUNDED, None, float("nan")
            return OPTIMAL, point, value
        return self._solve_mip(handle)

    def _solve_mip(self, handle: BackendModel):
        program = handle.program
        bin_cols = _binary_tags(program)
        if len(bin_cols) > self.binary_cap:
            raise ValueError(
                f"{len(bin_cols)} binary variables exceed the fallback cap of {self.binary_cap}"
            )
        X = _subset_matrix(len(bin_cols))
        feasible = _rows_feasibility(handle.all_rows(), bin_cols, X)
        if not feasible.any():
            return INFEASIBLE, None, float("nan")

        kind = program.meta.get("kind")
        if kind == "base":
            objective, fill = self._eval_base(handle, X, bin_cols)
        elif kind == "xset":
            objective, fill = self._eval_xset(handle, X, bin_cols)
        elif kind == "outer":
            try:
                objective, fill = self._eval_outer(handle, X, bin_cols)
            except UnboundedError:
                return UNBOUNDED, None, float("nan")
        else:
            objective, fill = self._eval_generic(handle, X, bin_cols, feasible)

    # pick the best feasible subset; ties toward the smallest id list
        masked = np.where(feasible, objective, -np.inf)
        best = masked.max()
        if not np.isfinite(best):
            return INFEASIBLE, None, float("nan")
        ties = np.where(masked >= best - _TIE_TOL)[0]
        winner = min(ties, key=lambda s: tuple(np.where(X[s] > 0.5)[0]))

        values = np.zeros(len(program.variables))
        for c, j in enumerate(bin_cols):
            values[j] = X[winner, c]
        fill(int(winner), values)
        obj_vec = np.zeros(len(program.variables))
        for j, c in program.objective.items():
            obj_vec[j] = c
        return OPTIMAL, values, float(obj_vec @ values)

    def _eval_base(self, handle, X, bin_cols):
        model: RankingModel = handle.program.meta["model"]
        program = handle.program
        product_col = {
            program.variables[j].tag[1]: c for c, j in enumerate(bin_cols)
        }
        objective = _ranking_revenue_table(model, X, product_col)

        def fill(winner: int, values: np.ndarray) -> None:
            # purchase variables: 1 at the most preferred offered position
            for k, rk in enumerate(model.rankings):
                for pos, i in enumerate(rk.prefix, start=1):
                    if values[handle.var_index(("x", i))] > 0.5:
                        values[handle.var_index(("y", k, pos))] = 1.0
                        break

        return objective, fill

    def _eval_xset(self, handle, X, bin_cols):
        exclusion = handle.program.meta["exclusion"]
        program = handle.program
        inst = exclusion.model.instance
        product_col = {
            program.variables[j].tag[1]: c for c, j in enumerate(bin_cols)
        }
        objective = np.zeros(X.shape[0])
        for E, i, w in exclusion.pairs:
            active = X[:, product_col[i]] > 0.5
            for j in E:
                active &= X[:, product_col[j]] < 0.5
            objective[active] += w * float(inst.revenues[i - 1])

        def fill(winner: int, values: np.ndarray) -> None:
            for E in exclusion.sets:
                on = any(values[handle.var_index(("x", j))] > 0.5 for j in E)
                values[handle.var_index(("z", E))] = 1.0 if on else 0.0

        return objective, fill

    def _eval_outer(self, handle, X, bin_cols):
        """Epigraph evaluation: each q variable drops to its tightest row."""
        program = handle.program
        col_of = {j: c for c, j in enumerate(bin_cols)}
        q_vars = [j for j, v in enumerate(program.variables) if v.tag[0] == "q"]
        envelopes: Dict[int, List[Tuple[float, np.ndarray]]] = {j: [] for j in q_vars}
        for row in handle.all_rows():
            q_in_row = [j for j in row.coeffs if j in envelopes]
            if not q_in_row:
                continue
            if len(q_in_row) != 1 or row.sense != "<=" or row.coeffs[q_in_row[0]] <= 0:
                raise ValueError(f"row {row.name} is not an epigraph cut")
            q = q_in_row[0]
            scale = row.coeffs[q]
            xcoef = np.zeros(len(bin_cols))
            for j, c in row.coeffs.items():
                if j != q:
                    xcoef[col_of[j]] = -c / scale
            envelopes[q].append((row.rhs / scale, xcoef))

        objective = np.zeros(X.shape[0])
        q_values: Dict[int, np.ndarray] = {}
        for q in q_vars:
            weight = program.objective.get(q, 0.0)
            if not envelopes[q]:
                if weight > 0:
                    raise UnboundedError(f"q variable {program.variables[q].name} has no cut")
                q_values[q] = np.zeros(X.shape[0])
                continue
            vals = np.min(
                np.stack([c0 + X @ coef for c0, coef in envelopes[q]]), axis=0
            )
            # an envelope below the variable's floor leaves no feasible value
            floor = program.variables[q].lower
            objective[vals < floor - _TIE_TOL] = -np.inf
            q_values[q] = np.maximum(vals, floor)
            objective += weight * q_values[q]
        for j, c in program.objective.items():
            if j in col_of:
                objective += c * X[:, col_of[j]]

        def fill(winner: int, values: np.ndarray) -> None:
            for q in q_vars:
                values[q] = q_values[q][winner]

        return objective, fill

    def _eval_generic(self, handle, X, bin_cols, feasible):
        """Last resort: solve the residual LP at every feasible subset."""
        program = handle.program
        n = len(program.variables)
        cont = [j for j in range(n) if j not in set(bin_cols)]
        objective = np.full(X.shape[0], -np.inf)
        solutions: Dict[int, np.ndarray] = {}
        obj_vec = np.zeros(n)
        for j, c in program.objective.items():
            obj_vec[j] = c
        for s in np.where(feasible)[0]:
            fixed = {j: X[s, c] for c, j in enumerate(bin_cols)}
            if not cont:
                objective[s] = sum(obj_vec[j] * v for j, v in fixed.items())
                continue
            value, point = self._residual_lp(handle, fixed, cont)
            if value is None:
                continue
            objective[s] = value + sum(obj_vec[j] * v for j, v in fixed.items())
            solutions[int(s)] = point

        def fill(winner: int, values: np.ndarray) -> None:
            if winner in solutions:
                for idx, j in enumerate(cont):
                    values[j] = solutions[winner][idx]

        return objective, fill

    def _residual_lp(self, handle, fixed: Dict[int, float], cont: List[int]):
        program = handle.program
        col_of = {j: c for c, j in enumerate(cont)}
        rows, senses, rhs = [], [], []
        for row in handle.all_rows():
            coef = np.zeros(len(cont))
            shift = 0.0
            for j, c in row.coeffs.items():
                if j in col_of:
                    coef[col_of[j]] = c
                else:
                    shift += c * fixed[j]
            if not coef.any():
                ok = (
                    shift <= row.rhs + _TIE_TOL
                    if row.sense == "<="
                    else shift >= row.rhs - _TIE_TOL
                    if row.sense == ">="
                    else abs(shift - row.rhs) <= _TIE_TOL
                )
                if not ok:
                    return None, None
                continue
            rows.append(coef)
            senses.append(row.sense)
            rhs.append(row.rhs - shift)
        obj = np.array([program.objective.get(j, 0.0) for j in cont])
        lp = DenseLp(
            objective=obj,
            lhs=np.array(rows) if rows else np.zeros((0, len(cont))),
            senses=tuple(senses),
            rhs=np.array(rhs),
            lower=np.array([program.variables[j].lower for j in cont]),
            upper=np.array([program.variables[j].upper for j in cont]),
        )
        try:
            value, point = simplex_solve(lp)
        except InfeasibleError:
            return None, None
        return value, point


def parse_solution_file(path, variable_names) -> Tuple[Optional[float], Dict[str, float]]:
    """Parse a solver solution file; accepts both dialects from the README.

    Dialect A starts with ``# Objective value = <v>``, dialect B with
    ``objective value: <v>``; in both, remaining lines are ``name value``
    pairs (trailing annotations are ignored).
    """
    known = set(variable_names)
    objective = None
    values: Dict[str, float] = {}
    obj_re = re.compile(r"objective\s*(?:value)?\s*[:=]\s*([-+0-9.eE]+)", re.IGNORECASE)
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            match = obj_re.search(line)
            if match and (objective is None):
                objective = float(match.group(1))
                continue
            if line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) >= 2 and parts[0] in known:
                try:
                    values[parts[0]] = float(parts[1])
                except ValueError:
                    pass
    return objective, values


class ExternalLpBackend:
    """File-based adapter around a solver executable.

    The executable named by ``ASSORTOPT_SOLVER`` is invoked as
    ``solver <model.lp> <solution.out>``; it must exit 0 and write a
    solution file in one of the accepted dialects.  Kept dependency-free on
    purpose - in-process adapters can wrap :class:`BackendModel` the same
    way the builtin backend does.
    """

    def __init__(self, binary: Optional[str] = None):
        binary = binary or os.environ.get(SOLVER_ENV_VAR)
        if not binary:
            raise ValueError(f"set {SOLVER_ENV_VAR} to the solver executable path")
        self.binary = binary
        self.capabilities = BackendCapabilities(
            supports_lp=True, supports_mip=True, supports_lazy_cuts=False, name="external"
        )

    def load(self, program: MathProgram) -> BackendModel:
        return BackendModel(program)

    def add_rows(self, handle: BackendModel, rows: Sequence[Constraint]) -> None:
        n = len(handle.program.variables)
        for row in rows:
            if any(not 0 <= j < n for j in row.coeffs):
                raise KeyError(f"row {row.name} references an unknown variable id")
        handle.extra_rows.extend(rows)

    def solve(self, handle: BackendModel, lazy_cut_source=None):
        while True:
            status, values, objective = self._solve_once(handle)
            if status != OPTIMAL or lazy_cut_source is None:
                return status, values, objective
            new_rows = list(lazy_cut_source(values))
            if not new_rows:
                return status, values, objective
            self.add_rows(handle, new_rows)

    def _solve_once(self, handle: BackendModel):
        program = handle.program
        merged = MathProgram(
            variables=program.variables,
            constraints=tuple(handle.all_rows()),
            objective=program.objective,
            meta={},
        )
        with tempfile.TemporaryDirectory(prefix="assortopt_") as tmp:
            lp_path = os.path.join(tmp, "model.lp")
            sol_path = os.path.join(tmp, "solution.out")
            write_lp(merged, lp_path)
            try:
                subprocess.run([self.binary, lp_path, sol_path], check=True, capture_output=True)
            except (OSError, subprocess.CalledProcessError) as exc:
                keep = os.path.join(tempfile.gettempdir(), "assortopt_failed.lp")
                write_lp(merged, keep)
                raise RuntimeError(f"external solver failed (model dumped to {keep}): {exc}") from exc
            objective, by_name = parse_solution_file(sol_path, [v.name for v in program.variables])
        values = np.zeros(len(program.variables))
        for j, v in enumerate(program.variables):
            values[j] = by_name.get(v.name, 0.0)
        if objective is None:
            obj_vec = np.zeros(len(program.variables))
            for j, c in program.objective.items():
                obj_vec[j] = c
            objective = float(obj_vec @ values)
        return OPTIMAL, values, float(objective)
