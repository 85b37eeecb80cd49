"""Limit laws for balanced multicolor urns: classify, predict, verify.

The package splits into thin layers.  core simulates trajectories and
ensembles of a replacement scheme; spectral recognizes which structural
family a replacement matrix belongs to and extracts the vectors the limit
theory is phrased in; laws turns a recognized structure into explicit
limit-law predictions per tracked linear statistic; oracle recomputes the
small-n identities behind those predictions by exact enumeration; verify
runs Monte Carlo ensembles against the predictions and renders verdicts;
cli wires everything to JSON configs and artifact files.
"""
from .core import (
    EnsemblePaths,
    ReplacementSpec,
    Trajectory,
    UrnState,
    color_from_uniform,
    default_checkpoints,
    draw,
    initial_state,
    new_spec,
    simulate,
    simulate_many,
    step,
    trajectory_rng,
)
from .laws import (
    LawPrediction,
    LimitKind,
    Normalization,
    euler_ratio,
    pi_n,
    predict,
)
from .oracle import (
    OutcomeAtom,
    compensated_martingale_check,
    exact_conditional_variance_check,
    exact_distribution,
    exact_mean_linear,
    exact_mean_vector,
)
from .spectral import (
    Family,
    StructureClass,
    classify,
    eigenpair_2x2,
    jordan_basis,
    normalize_eigvec,
    stationary_2x2,
)
from .verify import (
    ASDiagnostics,
    CheckResult,
    EnsembleReport,
    PredictionOutcome,
    ReportVerdict,
    RowVerdict,
    VerdictPolicy,
    as_convergence_diag,
    estimate_U,
    evaluate_report,
    ks_standard_normal,
    run_ensemble,
    studentize,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "EnsemblePaths",
    "ReplacementSpec",
    "Trajectory",
    "UrnState",
    "color_from_uniform",
    "default_checkpoints",
    "draw",
    "initial_state",
    "new_spec",
    "simulate",
    "simulate_many",
    "step",
    "trajectory_rng",
    "LawPrediction",
    "LimitKind",
    "Normalization",
    "euler_ratio",
    "pi_n",
    "predict",
    "OutcomeAtom",
    "compensated_martingale_check",
    "exact_conditional_variance_check",
    "exact_distribution",
    "exact_mean_linear",
    "exact_mean_vector",
    "Family",
    "StructureClass",
    "classify",
    "eigenpair_2x2",
    "jordan_basis",
    "normalize_eigvec",
    "stationary_2x2",
    "ASDiagnostics",
    "CheckResult",
    "EnsembleReport",
    "PredictionOutcome",
    "ReportVerdict",
    "RowVerdict",
    "VerdictPolicy",
    "as_convergence_diag",
    "estimate_U",
    "evaluate_report",
    "ks_standard_normal",
    "run_ensemble",
    "studentize",
]
