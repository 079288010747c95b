"""Keypoint-guided optimal transport.

Matching a priori known point pairs exactly while transporting the rest of
the mass: masked plans, relation-preservation guidance, exact and entropic
solvers, a structure-blended solver, budgeted (partial) transport with
dummy absorption, and an L2-regularized dual solver.
"""

import os as _os

# Honor KPG_OT_THREADS before numpy loads its BLAS (this module is imported
# before numpy whenever the package is the entry point, e.g. the CLI).
_threads = _os.environ.get("KPG_OT_THREADS")
if _threads:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        _os.environ.setdefault(_var, _threads)
del _os, _threads

from ._backend import COMPILED
from .core import (
    CostMatrix,
    CostMetric,
    DimensionMismatch,
    DiscreteDistribution,
    Divergence,
    EmptyKeypoints,
    IncompatibleMode,
    IndexOutOfBounds,
    Infeasible,
    InfeasibleMask,
    InvalidEta,
    InvalidMassBudget,
    InvalidParameters,
    KeypointMassExceedsBudget,
    KeypointPairing,
    KpgOtError,
    MaskMatrix,
    MassMismatchAtKeypoint,
    NonFiniteInput,
    NonPositiveA,
    NonPositiveWeight,
    NonSimplexRow,
    NumericalUnderflow,
    RelationMode,
    ShapeMismatch,
    SolverConfig,
    SolverTag,
    TheoremViolation,
    TransportPlan,
    make_distribution,
    pairwise_cost,
)
from .dual import (
    PotentialPair,
    dual_gradient,
    dual_objective,
    l2_regularized_objective,
    recover_plan,
    solve_dual,
)
from .exact import Backend, lp_masked, solve_kpg_rl, solve_kpg_rl_kp
from .gromov import FrankWolfeTrace, gw_gradient, solve_kpg_rl_gw
from .harness import (
    Method,
    MethodResult,
    ToyScenario,
    gen_mixture_scenario,
    gen_partial_scenario,
    matching_accuracy,
    run_comparison,
    subset_keypoints,
)
from .masking import MaskFeasibilityReport, build_mask, check_masked_feasibility, pairs_from_mask
from .partial import AugmentedProblem, augment, solve_partial_kpg_rl, solve_partial_masked
from .projection import barycentric_map, received_mass_outliers
from .relation import RelationMatrix, guiding_matrix, relation_scores
from .sinkhorn import sinkhorn_masked, sinkhorn_masked_log

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "COMPILED",
    # core types
    "CostMatrix",
    "CostMetric",
    "DiscreteDistribution",
    "Divergence",
    "KeypointPairing",
    "MaskMatrix",
    "RelationMode",
    "SolverConfig",
    "SolverTag",
    "TransportPlan",
    "make_distribution",
    "pairwise_cost",
    # errors
    "KpgOtError",
    "DimensionMismatch",
    "EmptyKeypoints",
    "IncompatibleMode",
    "IndexOutOfBounds",
    "Infeasible",
    "InfeasibleMask",
    "InvalidEta",
    "InvalidMassBudget",
    "InvalidParameters",
    "KeypointMassExceedsBudget",
    "MassMismatchAtKeypoint",
    "NonFiniteInput",
    "NonPositiveA",
    "NonPositiveWeight",
    "NonSimplexRow",
    "NumericalUnderflow",
    "ShapeMismatch",
    "TheoremViolation",
    # masking
    "MaskFeasibilityReport",
    "build_mask",
    "check_masked_feasibility",
    "pairs_from_mask",
    # relation guidance
    "RelationMatrix",
    "guiding_matrix",
    "relation_scores",
    # solvers
    "Backend",
    "lp_masked",
    "solve_kpg_rl",
    "solve_kpg_rl_kp",
    "sinkhorn_masked",
    "sinkhorn_masked_log",
    "FrankWolfeTrace",
    "gw_gradient",
    "solve_kpg_rl_gw",
    "AugmentedProblem",
    "augment",
    "solve_partial_masked",
    "solve_partial_kpg_rl",
    "PotentialPair",
    "l2_regularized_objective",
    "dual_objective",
    "dual_gradient",
    "recover_plan",
    "solve_dual",
    # plan post-processing
    "barycentric_map",
    "received_mass_outliers",
    # experiment harness
    "Method",
    "MethodResult",
    "ToyScenario",
    "gen_mixture_scenario",
    "gen_partial_scenario",
    "subset_keypoints",
    "matching_accuracy",
    "run_comparison",
]
