"""Benders cuts as chain-feasible dual vectors, and what makes one strongest.

Each feasible vector ``delta`` gives the affine revenue bound
``J(x) = delta[-1] + sum_l (max(0, r_l - delta_l) - (delta_{l+1} -
delta_l)) x_l`` for one ranking.  Many vectors are optimal at the same
assortment, but their bounds differ away from it.  Four small cases below
show a weak vector, the structural property it misses, and the dominating
vector produced by the repair transform.
"""

import numpy as np

from assortopt import Instance, Ranking
from assortopt.cuts import (
    DualDelta,
    cut_coefficients,
    is_pareto_candidate,
    j_value,
    pareto_transform,
    phase1_cut,
    phase2_cut,
)
from assortopt.oracle import inner_lp_value


def express(d):
    cut = cut_coefficients(d)
    terms = "".join(
        f" {'+' if c >= 0 else '-'} {abs(c):g}*x{i}" for i, c in sorted(cut.coeffs.items()) if c
    )
    return f"J(x) = {cut.intercept:g}{terms}"


def show(title, inst, rk, weak):
    d = DualDelta(np.asarray(weak, float), rk, inst)
    ok, violated = is_pareto_candidate(d)
    repaired = pareto_transform(d)
    print(f"\n{title}")
    print(f"  revenues {inst.revenues[:-1].tolist()}, preference order {rk.prefix}")
    print(f"  weak vector  {d.delta.tolist()}  ->  {express(d)}   violates {violated}")
    print(f"  repaired     {repaired.delta.tolist()}  ->  {express(repaired)}")


show("1. plateau above every useful revenue (pivot stuck at position 1)",
     Instance(2, np.array([10.0, 5.0, 0.0])), Ranking((1, 2), 1.0), [10, 10, 10])
show("2. first entry above the first revenue",
     Instance(2, np.array([5.0, 10.0, 0.0])), Ranking((1, 2), 1.0), [10, 10, 10])
show("3. interior entry below its revenue without matching its successor",
     Instance(3, np.array([10.0, 10.0, 10.0, 0.0])), Ranking((1, 2, 3), 1.0), [0, 0, 10, 10])
show("4. tail rising past the pivot",
     Instance(2, np.array([10.0, 5.0, 0.0])), Ranking((1, 2), 1.0), [5, 5, 10])

print("\n== generating optimal vectors ==")
inst = Instance(4, np.array([40.0, 10.0, 25.0, 55.0, 0.0]))
rk = Ranking((4, 1, 3, 2), 1.0)

x_bin = np.array([0.0, 1.0, 1.0, 0.0, 1.0])
d2 = phase2_cut(x_bin, rk, inst)
print(f"binary x={x_bin[:-1].tolist()}: closed form gives {d2.delta.tolist()}, "
      f"value {j_value(x_bin, d2)} (the revenue actually earned)")

x_frac = np.array([0.4, 0.9, 0.1, 0.3, 1.0])
d1 = phase1_cut(x_frac, rk, inst)
print(f"fractional x={x_frac[:-1].tolist()}: the pooling solver gives "
      f"{d1.delta.tolist()}, value {j_value(x_frac, d1):.6g}")
print(f"  the revenue LP solved directly agrees: "
      f"{inner_lp_value(x_frac, rk, inst):.6g}")
print(f"  after the repair transform the value at x is unchanged: "
      f"{j_value(x_frac, pareto_transform(d1)):.6g}")
