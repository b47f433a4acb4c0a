"""Structured multimarginal optimal transport: oracles, engines, and apps.

The package solves min <P, C> over transport plans with k marginals on n
atoms, where the cost tensor C is given implicitly through a structured
backend (graphical, set-optimization, low-rank-plus-sparse, or explicit
dense) exposing minimization oracles.  Engines: exact column generation,
entropic scaling (sinkhorn), and multiplicative-weights (mwu).
"""

from .algorithms import (
    MwuFeasResult,
    MwuState,
    ScaledPlan,
    SolveReport,
    colgen_solve,
    mwu_feasibility,
    mwu_potential_derivative,
    mwu_round,
    mwu_solve,
    sample_scaled_plan,
    sinkhorn_solve,
)
from .apps import (
    EulerFlowProblem,
    FwResult,
    ProjectionProblem,
    ReliabilityProblem,
    ReliabilityResult,
    RiskProblem,
    build_euler_flow_cost,
    build_reliability_cost,
    build_risk_cost,
    euler_flow_maps,
    euler_flow_marginals,
    euler_grid_problem,
    euler_sigma,
    fw_project,
    network_reliability,
    risk_solve,
    worst_case_profit,
)
from .core import (
    BruteForceCapError,
    CapabilityError,
    ConvergenceError,
    DegenerateSupportError,
    DenseTensor,
    DualWeights,
    Marginals,
    MotError,
    OracleViolationError,
    PrecisionError,
    SparsePlan,
    TreewidthCapError,
    check_feasible,
    entropy,
    plan_cost,
    vertex_sparsity_ok,
)
from .graphical import Factor, GraphicalCost, JunctionTree, build_junction_tree
from .lowrank import LowRankFactors, LowRankPlusSparseCost, SparseComponent
from .oracles import (
    ALL_ORACLES,
    AMIN,
    ARGAMIN,
    ARGMIN,
    MARG,
    MIN,
    SMIN,
    DenseCost,
    OracleAnswerArg,
    StructuredCost,
    oracle_amin,
    oracle_argamin,
    oracle_argmin,
    oracle_marg,
    oracle_min,
    oracle_smin,
)
from .setopt import SetOptCost, SetOracle, UGraph
from .simplex import LpSolution, StandardFormLP, brute_force_mot, lp_solve

__version__ = "1.0.0"

__all__ = [
    "ALL_ORACLES", "AMIN", "ARGAMIN", "ARGMIN", "MARG", "MIN", "SMIN",
    "BruteForceCapError", "CapabilityError", "ConvergenceError",
    "DegenerateSupportError", "DenseCost", "DenseTensor", "DualWeights",
    "EulerFlowProblem", "Factor", "FwResult", "GraphicalCost",
    "JunctionTree", "LowRankFactors", "LowRankPlusSparseCost",
    "LpSolution", "Marginals", "MotError", "MwuFeasResult", "MwuState",
    "OracleAnswerArg", "OracleViolationError", "PrecisionError",
    "ProjectionProblem", "ReliabilityProblem", "ReliabilityResult",
    "RiskProblem", "ScaledPlan", "SetOptCost", "SetOracle", "SolveReport",
    "SparseComponent", "SparsePlan", "StandardFormLP", "StructuredCost",
    "TreewidthCapError", "UGraph", "brute_force_mot",
    "build_euler_flow_cost", "build_junction_tree",
    "build_reliability_cost", "build_risk_cost", "check_feasible",
    "colgen_solve", "entropy", "euler_flow_maps", "euler_flow_marginals",
    "euler_grid_problem", "euler_sigma", "fw_project", "lp_solve",
    "mwu_feasibility", "mwu_potential_derivative", "mwu_round",
    "mwu_solve", "network_reliability", "oracle_amin", "oracle_argamin",
    "oracle_argmin", "oracle_marg", "oracle_min", "oracle_smin",
    "plan_cost", "risk_solve", "sample_scaled_plan", "sinkhorn_solve",
    "vertex_sparsity_ok", "worst_case_profit",
]
