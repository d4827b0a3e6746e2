"""Assortment optimization under ranking-based choice models.

A solver library for the sample average approximation of assortment
optimization: aggregate Monte-Carlo utility samples into a ranking-based
choice model, build mixed-integer formulations (including the aggregated
exclusion-set form), or run two-phase Benders decomposition with
Pareto-optimal cuts generated in near-linear time per ranking.  Everything
is verifiable at desk scale against built-in brute-force and simplex
oracles, with no external solver required.
"""

from .backend import BackendCapabilities, BuiltinBackend, ExternalLpBackend
from .benders import SolveReport, initial_cut, run_phase1, run_phase2, solve_two_phase
from .cuts import (
    Cut,
    DualDelta,
    cut_coefficients,
    is_pareto_candidate,
    j_value,
    pareto_transform,
    phase1_cut,
    phase2_cut,
    t_index,
    to_dual_triplet,
)
from .evaluate import (
    BenchmarkConfig,
    BenchmarkSetting,
    GapReport,
    approximation_gap,
    cross_validate,
    run_benchmark,
)
from .formulations import (
    ExclusionModel,
    MathProgram,
    build_base_mip,
    build_exclusion_sets,
    build_xset_mip,
    lp_relaxation,
    write_lp,
)
from .model import (
    Instance,
    Ranking,
    RankingModel,
    binary_assortment,
    expected_revenue,
    load_instance,
    rankings_from_samples,
    revenue_of,
    save_instance,
)
from .oracle import enumerate_optimal, inner_dual_value, inner_lp_value, simplex_solve
from .sampler import (
    GroundTruth,
    MnlCutoffModel,
    assign_revenues,
    fit_mnl,
    generate_ground_truth,
    make_synthetic_instance,
    sample_utilities,
)

__version__ = "0.1.0"
