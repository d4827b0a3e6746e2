"""Benders cut generation via a chain-constrained reformulated dual.

For a ranking with prefix positions 1..L (position L+1 being no-purchase),
the dual of the per-ranking revenue LP reduces to minimizing

    J(x, delta) = delta_{L+1}
                + sum_l (max(0, r_l - delta_l) - (delta_{l+1} - delta_l)) x_l

over the chain  0 <= delta_1 <= ... <= delta_{L+1} <= rbar,  where r_l is the
revenue at prefix position l and rbar the top prefix revenue.  Every feasible
``delta`` therefore yields an affine upper bound on the ranking's revenue,
i.e. a Benders cut.  This module provides:

* ``phase1_cut``: minimizer for fractional assortments via pool-adjacent-
  violators on the separable piecewise-linear pieces (isotonic-regression
  style), and ``phase2_cut``: the O(L) closed form for binary assortments.
* The four structural properties that characterize undominated (Pareto)
  cuts, and ``pareto_transform``, which repairs any feasible ``delta`` into a
  Pareto cut that dominates it, in four linear-time passes.
* ``cut_coefficients`` / ``to_dual_triplet`` to read a ``delta`` back as an
  affine cut or as a feasible point of the original dual LP.

Entries of ``delta`` are kept exactly on the grid of prefix revenues
(plus 0 and rbar) whenever they are within ``GRID_SNAP_TOL``, so the
property predicates below can use exact comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .model import Instance, Ranking, check_assortment

__all__ = [
    "Cut",
    "DualDelta",
    "PooledBlock",
    "cut_coefficients",
    "is_pareto_candidate",
    "j_value",
    "pareto_transform",
    "phase1_cut",
    "phase2_cut",
    "t_index",
    "to_dual_triplet",
]

#: Entries this close to a prefix-revenue value are snapped onto it exactly.
GRID_SNAP_TOL = 1e-9

#: Slope / minimizer-order tolerance inside the PAV solver.
PAV_TOL = 1e-12


@dataclass(frozen=True)
class DualDelta:
    """A chain-feasible dual vector for one ranking.

    ``delta`` has length ``L+1``; entry ``L+1`` is the no-purchase position.
    Membership of the chain set (nondecreasing within [0, rbar]) is validated
    on construction.
    """

    delta: np.ndarray
    ranking: Ranking
    instance: Instance

    def __post_init__(self):
        d = np.asarray(self.delta, dtype=float).copy()
        L = self.ranking.length
        if d.shape != (L + 1,):
            raise ValueError(f"delta must have length {L + 1} (got {d.shape})")
        rbar = self.top_revenue
        if d[0] < -GRID_SNAP_TOL or d[-1] > rbar + GRID_SNAP_TOL:
            raise ValueError(f"delta must lie within [0, {rbar}]")
        if np.any(np.diff(d) < -GRID_SNAP_TOL):
            raise ValueError("delta must be nondecreasing")
        np.clip(d, 0.0, rbar, out=d)
        np.maximum.accumulate(d, out=d)
        d.setflags(write=False)
        object.__setattr__(self, "delta", d)

    @property
    def prefix_revenues(self) -> np.ndarray:
        """Revenues at prefix positions 1..L followed by 0 for no-purchase."""
        rev = self.instance.revenues
        return np.array([rev[i - 1] for i in self.ranking.prefix] + [0.0])

    @property
    def top_revenue(self) -> float:
        return self.ranking.top_revenue(self.instance)


@dataclass(frozen=True)
class Cut:
    """An affine upper bound ``q_k <= intercept + sum_i coeffs[i] * x_i``.

    ``coeffs`` maps product ids to coefficients; its support is contained in
    the generating ranking's prefix (explicit zeros are kept so the cut can
    be read off position by position).
    """

    ranking_index: int
    intercept: float
    coeffs: Dict[int, float] = field(default_factory=dict)

    def evaluate(self, x: np.ndarray) -> float:
        return self.intercept + sum(c * x[i - 1] for i, c in self.coeffs.items())

    def key(self) -> tuple:
        """Hashable fingerprint for cut deduplication, rounded to 1e-9."""
        items = tuple(sorted((i, round(c, 9)) for i, c in self.coeffs.items() if round(c, 9) != 0.0))
        return (round(self.intercept, 9), items)


def _snap_to_grid(values: np.ndarray, ranking: Ranking, instance: Instance) -> np.ndarray:
    """Pull entries onto the revenue grid when within ``GRID_SNAP_TOL``."""
    grid = np.unique(
        np.array([instance.revenues[i - 1] for i in ranking.prefix] + [0.0, ranking.top_revenue(instance)])
    )
    out = values.copy()
    for idx, v in enumerate(out):
        j = np.searchsorted(grid, v)
        for cand in (j - 1, j):
            if 0 <= cand < len(grid) and abs(grid[cand] - v) <= GRID_SNAP_TOL:
                out[idx] = grid[cand]
                break
    return out


def j_value(x: np.ndarray, d: DualDelta) -> float:
    """Evaluate the reformulated dual objective at an assortment.

    Accepts binary or fractional assortments; raises on length mismatch.
    """
    n = d.instance.n_products
    x = np.asarray(x, dtype=float)
    if x.shape != (n + 1,):
        raise ValueError(f"assortment must have length {n + 1} (got {x.shape})")
    delta = d.delta
    rev = d.prefix_revenues
    total = delta[-1]
    for pos, i in enumerate(d.ranking.prefix):
        total += (max(0.0, rev[pos] - delta[pos]) - (delta[pos + 1] - delta[pos])) * x[i - 1]
    return float(total)


def phase2_cut(x: np.ndarray, ranking: Ranking, instance: Instance) -> DualDelta:
    """Closed-form optimal dual vector at a binary assortment.

    With ``l*`` the most preferred offered position (no-purchase counts), the
    optimum sets ``delta_l`` to that position's revenue up to ``l*`` and to
    the top prefix revenue afterwards; its value equals the revenue actually
    earned from the ranking.
    """
    x = check_assortment(x, instance.n_products, binary=True)
    L = ranking.length
    l_star = L + 1
    for pos, i in enumerate(ranking.prefix):
        if x[i - 1] == 1.0:
            l_star = pos + 1
            break
    r_star = instance.revenues[ranking.prefix[l_star - 1] - 1] if l_star <= L else 0.0
    rbar = ranking.top_revenue(instance)
    delta = np.full(L + 1, rbar)
    delta[:l_star] = r_star
    return DualDelta(delta=delta, ranking=ranking, instance=instance)


@dataclass
class PooledBlock:
    """A run of chain positions merged by PAV.

    The pooled objective piece is convex piecewise linear: ``base_slope``
    to the left of every breakpoint, plus a nonnegative ``jump`` at each
    breakpoint.  ``minimizer`` is the lower endpoint of its argmin clamped
    to ``[0, ceiling]``.
    """

    start: int
    end: int
    base_slope: float
    points: List[Tuple[float, float]]  # (breakpoint, slope jump), ascending
    ceiling: float
    minimizer: float = field(init=False)

    def __post_init__(self):
        self.minimizer = self._argmin()

    def _argmin(self) -> float:
        slope = self.base_slope
        if slope >= -PAV_TOL:
            return 0.0
        for t, jump in self.points:
            slope += jump
            if slope >= -PAV_TOL:
                return min(max(t, 0.0), self.ceiling)
        return self.ceiling

    def absorb(self, other: "PooledBlock") -> None:
        """Meld a following block into this one (linear merge of breakpoints)."""
        self.end = other.end
        self.base_slope += other.base_slope
        merged: List[Tuple[float, float]] = []
        a, b = self.points, other.points
        i = j = 0
        while i < len(a) and j < len(b):
            if a[i][0] <= b[j][0]:
                merged.append(a[i])
                i += 1
            else:
                merged.append(b[j])
                j += 1
        merged.extend(a[i:])
        merged.extend(b[j:])
        self.points = merged
        self.minimizer = self._argmin()


def phase1_cut(x: np.ndarray, ranking: Ranking, instance: Instance) -> DualDelta:
    """Optimal dual vector at a fractional assortment via PAV pooling.

    The objective separates into one convex piecewise-linear piece per chain
    position; pool-adjacent-violators merges pieces whose unconstrained
    minimizers break the chain order, and flat minima resolve to their lower
    endpoint.  The optimal value matches the revenue LP solved directly, a
    fact the test suite checks against the simplex oracle.
    """
    x = check_assortment(x, instance.n_products)
    L = ranking.length
    rev = [float(instance.revenues[i - 1]) for i in ranking.prefix]
    xs = [float(x[i - 1]) for i in ranking.prefix]
    rbar = ranking.top_revenue(instance)

    blocks: List[PooledBlock] = []
    for pos in range(L + 1):
        if pos < L:
            x_prev = xs[pos - 1] if pos > 0 else 0.0
            piece = PooledBlock(pos, pos, -x_prev, [(rev[pos], xs[pos])], rbar)
        else:
            piece = PooledBlock(pos, pos, 1.0 - xs[L - 1], [], rbar)
        while blocks and blocks[-1].minimizer > piece.minimizer + PAV_TOL:
            prev = blocks.pop()
            prev.absorb(piece)
            piece = prev
        blocks.append(piece)

    delta = np.empty(L + 1)
    for blk in blocks:
        delta[blk.start : blk.end + 1] = blk.minimizer
    np.maximum.accumulate(delta, out=delta)
    delta = _snap_to_grid(delta, ranking, instance)
    return DualDelta(delta=delta, ranking=ranking, instance=instance)


def t_index(d: DualDelta) -> int:
    """Largest position whose entry does not exceed that position's revenue.

    Always well defined: the no-purchase position has revenue 0 and some
    prefix position carries the top revenue, so the set is nonempty.
    """
    rev = d.prefix_revenues
    hits = np.where(d.delta <= rev)[0]
    if hits.size == 0:
        raise ValueError("no position satisfies delta_L <= r_L; delta is infeasible")
    return int(hits[-1]) + 1


def is_pareto_candidate(d: DualDelta) -> Tuple[bool, List[str]]:
    """Check the four structural properties of undominated cuts.

    Returns ``(all_hold, violated_ids)`` with ids among ``P1..P4``:

    * P1: the pivot index exceeds 1.
    * P2: the first entry is at most the first prefix revenue.
    * P3: interior entries strictly below their revenue equal the next entry.
    * P4: entries from the pivot onward are all equal.
    """
    delta = d.delta
    rev = d.prefix_revenues
    L = d.ranking.length
    t = t_index(d)
    violated = []
    if not t > 1:
        violated.append("P1")
    if not delta[0] <= rev[0]:
        violated.append("P2")
    for pos in range(1, L):  # positions 2..L
        if delta[pos] < rev[pos] and delta[pos] != delta[pos + 1]:
            violated.append("P3")
            break
    if not np.all(delta[t - 1 :] == delta[t - 1]):
        violated.append("P4")
    return (not violated, violated)


def _cap_at_second_revenue(d: DualDelta) -> DualDelta:
    """Repair P1: cap every entry at the second-highest distinct revenue.

    Identity whenever P1 already holds.  The distinct revenues include 0 for
    the no-purchase position, so the cap is well defined (and may be 0).
    """
    if t_index(d) > 1:
        return d
    distinct = np.unique(d.prefix_revenues)
    cap = float(distinct[-2])
    return DualDelta(np.minimum(d.delta, cap), d.ranking, d.instance)


def _lower_first_entry(d: DualDelta) -> DualDelta:
    """Repair P2: pull the first entry down to the first prefix revenue."""
    r1 = d.prefix_revenues[0]
    if d.delta[0] <= r1:
        return d
    delta = d.delta.copy()
    delta[0] = r1
    return DualDelta(delta, d.ranking, d.instance)


def _close_gaps_downward(d: DualDelta) -> DualDelta:
    """Repair P3 by a backward sweep.

    Entries strictly below their revenue are raised to meet either that
    revenue or the (already repaired) next entry, whichever is smaller.
    """
    delta = d.delta.copy()
    rev = d.prefix_revenues
    L = d.ranking.length
    for pos in range(L - 1, 0, -1):  # positions L..2
        if delta[pos] < rev[pos]:
            delta[pos] = min(rev[pos], delta[pos + 1])
    return DualDelta(delta, d.ranking, d.instance)


def _flatten_tail(d: DualDelta) -> DualDelta:
    """Repair P4: cap everything at the pivot entry or the best revenue after it."""
    delta = d.delta
    rev = d.prefix_revenues
    t = t_index(d)
    tail = rev[t:]  # revenues strictly after the pivot position
    cap = max(float(delta[t - 1]), float(tail.max()) if tail.size else 0.0)
    return DualDelta(np.minimum(delta, cap), d.ranking, d.instance)


def pareto_transform(d: DualDelta) -> DualDelta:
    """Turn a feasible dual vector into a Pareto cut that dominates it.

    Applies the four repair passes in order; each preserves chain
    feasibility and the properties established by the previous passes, and
    each is the identity when its property already holds.  The output never
    evaluates above the input at any assortment, so transforming an optimal
    vector preserves optimality.
    """
    out = _flatten_tail(_close_gaps_downward(_lower_first_entry(_cap_at_second_revenue(d))))
    snapped = _snap_to_grid(out.delta, d.ranking, d.instance)
    return DualDelta(snapped, d.ranking, d.instance)


def cut_coefficients(d: DualDelta, ranking_index: int = 0) -> Cut:
    """Read a dual vector as an affine cut in the assortment variables.

    The intercept is the no-purchase entry; the coefficient on the product
    at prefix position ``l`` is ``max(0, r_l - delta_l) - (delta_{l+1} -
    delta_l)``.  Evaluating the cut reproduces :func:`j_value` exactly.
    """
    delta = d.delta
    rev = d.prefix_revenues
    coeffs = {}
    for pos, i in enumerate(d.ranking.prefix):
        coeffs[i] = float(max(0.0, rev[pos] - delta[pos]) - (delta[pos + 1] - delta[pos]))
    return Cut(ranking_index=ranking_index, intercept=float(delta[-1]), coeffs=coeffs)


def to_dual_triplet(d: DualDelta, n_products: int) -> Tuple[np.ndarray, np.ndarray, float]:
    """Map a chain vector to a feasible point of the original dual LP.

    Returns position-indexed ``(alpha, beta)`` of length N+1 plus the scalar
    ``gamma``, built so that ``gamma + sum_l (alpha_l - beta_l) x_{i_l}``
    equals :func:`j_value` at every assortment.  ``gamma`` is the maximum
    revenue over all products, and positions past no-purchase carry zeros.
    """
    if n_products != d.instance.n_products:
        raise ValueError("product count does not match the delta's instance")
    L = d.ranking.length
    delta = d.delta
    rev = d.prefix_revenues
    r_top = float(d.instance.revenues.max())

    alpha = np.zeros(n_products + 1)
    beta = np.zeros(n_products + 1)
    alpha[: L + 1] = np.maximum(0.0, rev - delta)
    beta[:L] = np.diff(delta)
    beta[L] = r_top - delta[-1]
    return alpha, beta, r_top
