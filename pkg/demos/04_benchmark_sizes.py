"""Desk-scale benchmark: formulation sizes and solve times.

The aggregated exclusion-set formulation pays off when many sampled
rankings share their most preferred products ("collisions"), which happens
with many samples and small consideration sets.  The first table rebuilds
both formulations at a collision-heavy setting and reports the size ratio;
the second times the solve methods on instances small enough for the
built-in exact backend.  Wall times are machine-dependent: report them,
never assert them.
"""

from assortopt.evaluate import BenchmarkConfig, BenchmarkSetting, run_benchmark

print("== formulation sizes at a collision-heavy setting ==")
rows = run_benchmark(
    BenchmarkConfig(
        settings=[BenchmarkSetting(n=50, m=5, k_tilde=5000, rank_cutoff=5)],
        methods=["build"],
        seeds=(0,),
    )
)
(row,) = rows
print(f"  N={row['n']} M={row['m']} samples={row['k_tilde']} cutoff={row['rank_cutoff']}")
print(f"  per-position formulation: {row['base_vars']:.0f} variables, {row['base_rows']:.0f} rows")
print(f"  exclusion-set formulation: {row['xset_vars']:.0f} variables, {row['xset_rows']:.0f} rows")
print(f"  variable ratio {row['var_ratio']:.2f}, row ratio {row['row_ratio']:.2f} "
      f"(built in {row['seconds']:.2f}s)")

print("\n== solve methods on exactly-solvable sizes ==")
config = BenchmarkConfig(
    settings=[
        BenchmarkSetting(n=10, m=4, k_tilde=1000, rank_cutoff=3),
        BenchmarkSetting(n=12, m=4, k_tilde=1000, rank_cutoff=3, budget=4),
    ],
    methods=["enum", "base-mip", "xset-mip", "benders"],
    seeds=(0, 1),
    n_transactions=5000,
)
header = f"{'method':<10} {'N':>3} {'budget':>6} {'objective':>12} {'seconds':>8} {'p1 cuts':>8} {'p2 cuts':>8}"
print(header)
print("-" * len(header))
for row in run_benchmark(config):
    budget = row["budget"] if row["budget"] is not None else "-"
    p1 = f"{row['phase1_cuts']:.0f}" if "phase1_cuts" in row else "-"
    p2 = f"{row['phase2_cuts']:.0f}" if "phase2_cuts" in row else "-"
    print(f"{row['method']:<10} {row['n']:>3} {budget:>6} "
          f"{row['objective']:>12.2f} {row['seconds']:>8.3f} {p1:>8} {p2:>8}")
print("\n(objectives agree across methods; times averaged over the seed replications)")
