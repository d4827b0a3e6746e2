"""Independent ground-truth machinery: enumeration and a dense simplex solver.

Everything here exists so the rest of the library can be verified without an
external LP/MIP solver.  ``enumerate_optimal`` scans every feasible
assortment, ``simplex_solve`` is a small two-phase primal simplex with
Bland's anti-cycling rule, and ``inner_lp_value`` / ``inner_dual_value``
solve the per-ranking revenue linear program and its dual directly.  None of
these routines share code with the fast cut-generation path they are used to
check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .model import Instance, Ranking, RankingModel

__all__ = [
    "DenseLp",
    "InfeasibleError",
    "UnboundedError",
    "enumerate_optimal",
    "inner_dual_value",
    "inner_lp_value",
    "simplex_solve",
]

SIMPLEX_TOL = 1e-9

#: Largest product count the exhaustive oracle will accept by default.
ENUMERATION_CAP = 20

#: Absolute slack when collecting optimal assortments for tie-breaking.
ENUM_TIE_TOL = 1e-9


class InfeasibleError(Exception):
    """The linear program has no feasible solution."""


class UnboundedError(Exception):
    """The linear program is unbounded in the optimization direction."""


@dataclass
class DenseLp:
    """maximize ``objective @ v`` subject to ``lhs v (senses) rhs`` and bounds.

    ``senses`` entries are "<=", ">=", or "==".  Bounds may be ``-inf`` /
    ``+inf``; free and shifted variables are handled during preprocessing.
    """

    objective: np.ndarray
    lhs: np.ndarray
    senses: tuple
    rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        self.objective = np.asarray(self.objective, dtype=float)
        self.lhs = np.atleast_2d(np.asarray(self.lhs, dtype=float))
        self.rhs = np.asarray(self.rhs, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lhs.size == 0:
            self.lhs = np.zeros((len(self.rhs), len(self.objective)))
        if len(self.senses) != len(self.rhs):
            raise ValueError("one sense per constraint row required")
        if self.lhs.shape != (len(self.rhs), len(self.objective)):
            raise ValueError("inconsistent LP dimensions")
        if not (np.all(np.isfinite(self.objective)) and np.all(np.isfinite(self.lhs))):
            raise ValueError("objective and constraint entries must be finite")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")


def _to_standard_form(lp: DenseLp):
    """Rewrite as max c'v, A v (senses) b, v >= 0.

    Finite lower bounds are shifted out, free variables are split into a
    difference of nonnegatives, and finite upper bounds become rows.  Returns
    the pieces plus a function mapping a standard-form point back to the
    original variables.
    """
    n = len(lp.objective)
    cols = []  # (original index, sign, shift) per standard-form column
    for j in range(n):
        lo = lp.lower[j]
        if np.isfinite(lo):
            cols.append((j, 1.0, lo))
        else:
            cols.append((j, 1.0, 0.0))
            cols.append((j, -1.0, 0.0))
    n_std = len(cols)
    c = np.zeros(n_std)
    for idx, (j, sign, _shift) in enumerate(cols):
        c[idx] = sign * lp.objective[j]

    A = np.zeros((len(lp.rhs), n_std))
    for idx, (j, sign, _s) in enumerate(cols):
        A[:, idx] = sign * lp.lhs[:, j]
    b = lp.rhs - lp.lhs @ np.array(
        [lp.lower[j] if np.isfinite(lp.lower[j]) else 0.0 for j in range(n)]
    )
    senses = list(lp.senses)

    # Finite upper bounds turn into <= rows in shifted coordinates.
    ub_rows = []
    ub_rhs = []
    for idx, (j, sign, _s) in enumerate(cols):
        if sign < 0:
            continue
        hi = lp.upper[j]
        if np.isfinite(hi):
            lo = lp.lower[j] if np.isfinite(lp.lower[j]) else 0.0
            row = np.zeros(n_std)
            row[idx] = 1.0
            if not np.isfinite(lp.lower[j]):
                # free variable with finite upper bound: v+ - v- <= hi
                row[idx + 1] = -1.0
            ub_rows.append(row)
            ub_rhs.append(hi - lo)
    if ub_rows:
        A = np.vstack([A, np.array(ub_rows)])
        b = np.concatenate([b, np.array(ub_rhs)])
        senses.extend(["<="] * len(ub_rows))

    def recover(v_std: np.ndarray) -> np.ndarray:
        x = np.array([lp.lower[j] if np.isfinite(lp.lower[j]) else 0.0 for j in range(n)])
        for idx, (j, sign, _s) in enumerate(cols):
            x[j] += sign * v_std[idx]
        return x

    return c, A, np.asarray(b, dtype=float), tuple(senses), recover


def _pivot(
    tableau: np.ndarray,
    basis: np.ndarray,
    row: int,
    col: int,
    scratch: Optional[np.ndarray] = None,
) -> None:
    tableau[row] /= tableau[row, col]
    multipliers = tableau[:, col].copy()
    multipliers[row] = 0.0
    if scratch is None:
        tableau -= multipliers[:, None] * tableau[row]
    else:  # rank-1 update without reallocating the big temporary
        np.multiply(multipliers[:, None], tableau[row][None, :], out=scratch)
        tableau -= scratch
    tableau[:, col] = 0.0
    tableau[row, col] = 1.0
    basis[row] = col


#: Smallest tableau entry accepted as a pivot; rows are equilibrated, so
#: anything below this is treated as roundoff of zero.
PIVOT_TOL = 1e-7

#: Pivots between refactorizations of the working tableau.
REFACTOR_EVERY = 512


#: Degenerate pivots tolerated before Bland's rule takes over the pricing.
STALL_LIMIT = 25


def _run_simplex(tableau, basis, cost, max_iters, refactor=None):
    """Optimize ``max cost'v`` on the tableau in place.

    Pricing is most-negative-reduced-cost by default; after ``STALL_LIMIT``
    pivots without objective progress, Bland's anti-cycling rule (first
    favorable column, smallest basis index among ratio ties) takes over
    until progress resumes, which guarantees termination on degenerate
    bases.  The last tableau column holds the basic solution.  ``refactor``
    rebuilds the tableau from original data for the current basis and runs
    periodically to shed accumulated pivot roundoff.  Returns the final
    tableau; raises :class:`UnboundedError` on a recession direction and
    ``RuntimeError`` if the iteration guard trips.
    """
    m = tableau.shape[0]
    scratch = np.empty_like(tableau)
    just_refactored = False
    stall = 0
    last_objective = cost[basis] @ tableau[:, -1]
    for iteration in range(max_iters):
        if refactor is not None and iteration and iteration % REFACTOR_EVERY == 0:
            try:
                tableau = refactor(basis)
                scratch = np.empty_like(tableau)
            except np.linalg.LinAlgError:
                pass  # keep the accumulated tableau this round
        # reduced costs z_j - c_j for every column
        zrow = cost[basis] @ tableau[:, :-1] - cost
        favorable = zrow < -SIMPLEX_TOL
        if not favorable.any():
            return tableau
        bland = stall >= STALL_LIMIT
        entering = int(favorable.argmax()) if bland else int(zrow.argmin())
        piv_col = tableau[:, entering]
        eligible = piv_col > PIVOT_TOL
        if not eligible.any():
            # rows are equilibrated, so entries below PIVOT_TOL are noise:
            # clean up once and re-check before declaring the column zero
            if refactor is not None and not just_refactored:
                try:
                    tableau = refactor(basis)
                    scratch = np.empty_like(tableau)
                except np.linalg.LinAlgError as exc:
                    raise RuntimeError("numerically singular working basis") from exc
                just_refactored = True
                continue
            raise UnboundedError("objective increases without bound")
        just_refactored = False
        ratios = np.full(m, np.inf)
        ratios[eligible] = tableau[eligible, -1] / piv_col[eligible]
        best = ratios.min()
        # among minimum-ratio rows, Bland leaves on the smallest basis index
        tie = ratios <= best + SIMPLEX_TOL * (1.0 + abs(best))
        candidates = np.where(tie)[0]
        leave = candidates[np.argmin(basis[candidates])]
        _pivot(tableau, basis, leave, entering, scratch)
        objective = cost[basis] @ tableau[:, -1]
        if objective > last_objective + SIMPLEX_TOL * (1.0 + abs(last_objective)):
            stall = 0
            last_objective = objective
        else:
            stall += 1
    raise RuntimeError("simplex iteration guard tripped (possible cycling)")


def simplex_solve(lp: DenseLp) -> Tuple[float, np.ndarray]:
    """Solve a dense LP to optimality; returns (value, primal point).

    Two-phase primal simplex with Bland's rule, on row-equilibrated data
    with a unit-scale objective; the working tableau is refactorized from
    the original data periodically and at termination, so reported values
    carry no accumulated pivot roundoff.  Infeasibility and unboundedness
    raise :class:`InfeasibleError` and :class:`UnboundedError`.
    """
    c, A, b, senses, recover = _to_standard_form(lp)
    m, n = A.shape

    # Normalize rows to nonnegative rhs and equilibrate them to unit scale.
    A = A.copy()
    b = b.copy()
    senses = list(senses)
    for i in range(m):
        if b[i] < 0:
            A[i] *= -1.0
            b[i] *= -1.0
            senses[i] = {"<=": ">=", ">=": "<=", "==": "=="}[senses[i]]
        row_scale = np.abs(A[i]).max()
        if row_scale > 0.0:
            A[i] /= row_scale
            b[i] /= row_scale
    cost_scale = max(1.0, np.abs(c).max()) if n else 1.0

    slack_for_row = {}
    art_cols = []
    extra = []
    for i, sense in enumerate(senses):
        if sense == "<=":
            col = np.zeros(m)
            col[i] = 1.0
            extra.append(col)
            slack_for_row[i] = n + len(extra) - 1
        elif sense == ">=":
            col = np.zeros(m)
            col[i] = -1.0
            extra.append(col)
        elif sense != "==":
            raise ValueError(f"unknown sense {sense!r}")
    n_slack = len(extra)
    for i, sense in enumerate(senses):
        if sense in ("==", ">="):
            col = np.zeros(m)
            col[i] = 1.0
            extra.append(col)
            art_cols.append(n + len(extra) - 1)

    full = np.hstack([A] + ([np.array(extra).T] if extra else []))
    n_total = full.shape[1]
    tableau = np.hstack([full, b[:, None]])
    basis = np.zeros(m, dtype=int)
    art_iter = iter(art_cols)
    for i, sense in enumerate(senses):
        basis[i] = slack_for_row[i] if sense == "<=" else next(art_iter)

    max_iters = 200 * (m + n_total) + 5000

    def make_refactor(full_ref, b_ref):
        def refactor(current_basis):
            B = full_ref[:, current_basis]
            return np.hstack(
                [np.linalg.solve(B, full_ref), np.linalg.solve(B, b_ref)[:, None]]
            )

        return refactor

    if art_cols:
        phase1_cost = np.zeros(n_total)
        phase1_cost[art_cols] = -1.0
        tableau = _run_simplex(
            tableau, basis, phase1_cost, max_iters, make_refactor(full, b)
        )
        infeas = -(phase1_cost[basis] @ tableau[:, -1])
        if infeas > 1e-7:
            raise InfeasibleError(f"phase-1 infeasibility {infeas:.3e}")
        # Pivot lingering artificials out of the basis.  They sit at level
        # zero, so pivoting on any nonzero entry (sign regardless) keeps the
        # solution feasible; rows without one are redundant and get dropped,
        # together with any basis column left without original-data support.
        art_set = set(art_cols)
        redundant = set()
        for i in range(len(basis)):
            if basis[i] in art_set:
                row = np.abs(tableau[i, : n + n_slack])
                j = int(row.argmax())
                if row[j] > SIMPLEX_TOL:
                    _pivot(tableau, basis, i, j)
                else:
                    redundant.add(i)
        while redundant:
            keep = np.setdiff1d(np.arange(len(basis)), sorted(redundant))
            tableau = tableau[keep]
            basis = basis[keep]
            full = full[keep]
            b = b[keep]
            redundant = {
                i for i in range(len(basis))
                if np.abs(full[:, basis[i]]).max() <= SIMPLEX_TOL
            }
        full[:, art_cols] = 0.0  # bar re-entry in phase 2
        tableau[:, art_cols] = 0.0

    phase2_cost = np.zeros(n_total)
    phase2_cost[:n] = c / cost_scale
    refactor = make_refactor(full, b)
    tableau = _run_simplex(tableau, basis, phase2_cost, max_iters, refactor)

    # Final refinement: rebuild from original data at the current basis and
    # keep optimizing until the clean reduced costs certify optimality.
    for _ in range(8):
        try:
            tableau = refactor(basis)
        except np.linalg.LinAlgError:
            break  # keep the accumulated tableau; it already passed termination
        zrow = phase2_cost[basis] @ tableau[:, :-1] - phase2_cost
        if zrow.min() >= -SIMPLEX_TOL:
            break
        tableau = _run_simplex(tableau, basis, phase2_cost, max_iters, refactor)
    else:
        raise RuntimeError("simplex stopped without an optimality certificate")

    v = np.zeros(n_total)
    v[basis] = np.maximum(tableau[:, -1], 0.0)
    point = recover(v[:n])
    return float(lp.objective @ point), point


def enumerate_optimal(
    model: RankingModel,
    budget: Optional[int] = None,
    equality: bool = False,
    cap: int = ENUMERATION_CAP,
) -> Tuple[np.ndarray, float]:
    """Exhaustively maximize expected revenue over feasible assortments.

    ``budget`` defaults to the instance budget; pass an int to override.
    Ties are broken toward the lexicographically smallest indicator vector.
    Refuses instances with more than ``cap`` products - use the Benders
    solver for anything larger.
    """
    inst = model.instance
    n = inst.n_products
    if n > cap:
        raise ValueError(
            f"{n} products exceed the enumeration cap of {cap}; "
            "use the two-phase Benders solver instead"
        )
    if budget is None:
        budget = inst.budget

    masks = np.arange(1 << n, dtype=np.int64)
    included = ((masks[:, None] >> np.arange(n)) & 1).astype(bool)

    objective = np.zeros(len(masks))
    for rk in model.rankings:
        remaining = np.ones(len(masks), dtype=bool)
        rev = np.zeros(len(masks))
        for i in rk.prefix:
            hit = remaining & included[:, i - 1]
            rev[hit] = inst.revenues[i - 1]
            remaining &= ~hit
        objective += rk.probability * rev

    sizes = included.sum(axis=1)
    feasible = np.ones(len(masks), dtype=bool)
    if budget is not None:
        feasible = sizes == budget if equality else sizes <= budget
    if not feasible.any():
        raise ValueError("no feasible assortment under the requested budget")

    objective = np.where(feasible, objective, -np.inf)
    best = objective.max()
    ties = np.where(objective >= best - ENUM_TIE_TOL)[0]
    # ties: lexicographically smallest sorted id list, e.g. {1} < {1,2} < {2}
    def id_list(mask_idx: int) -> tuple:
        return tuple(np.where(included[mask_idx])[0] + 1)

    winner = min(ties, key=id_list)

    x = np.zeros(n + 1)
    x[:n] = included[winner]
    x[n] = 1.0
    return x, float(objective[winner])


def _reduced_inner_lp(x: np.ndarray, ranking: Ranking, instance: Instance) -> DenseLp:
    """The per-ranking revenue LP restricted to prefix positions.

    Positions past the no-purchase option are forced to zero in every
    feasible solution, so dropping them changes nothing.
    """
    prefix = ranking.prefix
    L = len(prefix)
    rev = np.array([instance.revenues[i - 1] for i in prefix] + [0.0])
    xs = np.array([x[i - 1] for i in prefix] + [1.0])

    n_var = L + 1
    rows = [np.ones(n_var)]
    senses = ["=="]
    rhs = [1.0]
    for pos in range(n_var):  # purchase at or above each offered position
        row = np.zeros(n_var)
        row[: pos + 1] = 1.0
        rows.append(row)
        senses.append(">=")
        rhs.append(xs[pos])
    return DenseLp(
        objective=rev,
        lhs=np.array(rows),
        senses=tuple(senses),
        rhs=np.array(rhs),
        lower=np.zeros(n_var),
        upper=xs.copy(),
    )


def inner_lp_value(x: np.ndarray, ranking: Ranking, instance: Instance) -> float:
    """Optimal revenue from one ranking at a (possibly fractional) assortment."""
    x = np.asarray(x, dtype=float)
    value, _ = simplex_solve(_reduced_inner_lp(x, ranking, instance))
    return value


def inner_dual_value(x: np.ndarray, ranking: Ranking, instance: Instance) -> float:
    """Value of the dual of the per-ranking revenue LP at ``x``.

    Variables are (alpha, beta) >= 0 per prefix position plus a free scalar;
    equals :func:`inner_lp_value` by strong duality, which the test suite
    checks to 1e-7.
    """
    x = np.asarray(x, dtype=float)
    prefix = ranking.prefix
    L = len(prefix)
    rev = np.array([instance.revenues[i - 1] for i in prefix] + [0.0])
    xs = np.array([x[i - 1] for i in prefix] + [1.0])
    n_pos = L + 1

    # columns: alpha (n_pos), beta (n_pos), gamma (free)
    n_var = 2 * n_pos + 1
    obj = np.zeros(n_var)
    obj[:n_pos] = -xs
    obj[n_pos : 2 * n_pos] = xs
    obj[-1] = -1.0  # maximize the negated dual objective

    rows = []
    for pos in range(n_pos):
        row = np.zeros(n_var)
        row[pos] = 1.0
        row[n_pos + pos : 2 * n_pos] = -1.0
        row[-1] = 1.0
        rows.append(row)
    lower = np.zeros(n_var)
    lower[-1] = -np.inf
    lp = DenseLp(
        objective=obj,
        lhs=np.array(rows),
        senses=tuple([">="] * n_pos),
        rhs=rev,
        lower=lower,
        upper=np.full(n_var, np.inf),
    )
    value, _ = simplex_solve(lp)
    return -value
