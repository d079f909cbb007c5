"""Noncoherent DOA estimation with sparse subarrays.

Array geometry design (splits and translated unions of sparse layouts),
coarray degrees-of-freedom analysis, a low-rank plus row-sparse convex
recovery solver, multi-snapshot support fusion, and a seeded Monte Carlo
benchmark harness.
"""

from .geometry import (
    ArrayGeometry,
    BoundResult,
    DofBoundReport,
    SubarrayPartition,
    UnsupportedSizeError,
    WeightFunction,
    check_dof_bound,
    dof,
    dof_bound_type2,
    make_mra,
    make_nested,
    make_ula,
    type1_split,
    type2_build,
    weight_function,
)
from .signal import (
    Grid,
    Scenario,
    SnapshotData,
    default_grid,
    gamma,
    gamma_diag,
    manifold,
    scenario_from_dict,
    scenario_to_dict,
    synthesize,
)
from .solver import (
    RecoveryProblem,
    RecoverySolution,
    SolverConfig,
    objective_value,
    project_residual_ball,
    prox_nuclear,
    prox_row_l12,
    solve_smv,
)
from .estimator import (
    EstimationFailedError,
    EstimatorConfig,
    SpectrumEstimate,
    estimate_doas,
    fuse_snapshots,
    hard_threshold_support,
    leading_left_singular_vector,
    pseudo_spectrum,
)
from .bench import (
    Campaign,
    CampaignResult,
    Sweep,
    beampattern,
    paper_campaigns,
    paper_geometries,
    rmse,
    run_campaign,
    write_results_csv,
    write_timing_csv,
)

__version__ = "0.1.0"
