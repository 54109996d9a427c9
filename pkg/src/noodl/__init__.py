"""Online dictionary learning with debiased sparse coefficient recovery.

The estimator alternates two stages over freshly drawn sample batches:
hard-thresholded gradient descent recovers each sample's sparse
coefficients against the current dictionary, then a sign-weighted empirical
gradient step updates the dictionary atoms. Both factors converge
geometrically when the data follow the sparse generative model in
:mod:`noodl.synth`; the package ships the estimator, the synthetic model,
permutation/sign-invariant recovery metrics, a thresholding-only baseline,
and an experiment harness with a CLI.
"""

from .baselines import baseline_config, run_biased_baseline
from .coeffs import CoeffSolverConfig, derive_R, estimate_coefficients, hard_threshold, iht_step
from .dictupdate import (
    DegenerateAtomError,
    GradientEstimate,
    empirical_gradient,
    gradient_step,
    normalize_columns,
)
from .harness import (
    ExperimentConfig,
    PhaseCell,
    SweepGrid,
    load_config,
    preset,
    preset_names,
    run_convergence,
    run_experiment,
    run_phase_transition,
    save_config,
)
from .metrics import column_errors, fit_error, rel_frobenius, support_accuracy
from .model import (
    ClosenessReport,
    SparseCoefficientBatch,
    SparseVector,
    align_coefficient_rows,
    align_dictionary,
    check_closeness,
    incoherence,
    match_atoms,
    spectral_norm,
)
from .runner import (
    IterationTrace,
    RunResult,
    SolverConfig,
    TerminationReason,
    run_noodl,
    run_noodl_with_data,
)
from .synth import GenerativeConfig, generate_batch, generate_ground_truth, perturb_dictionary

__version__ = "0.1.0"

__all__ = [
    "ClosenessReport",
    "CoeffSolverConfig",
    "DegenerateAtomError",
    "ExperimentConfig",
    "GenerativeConfig",
    "GradientEstimate",
    "IterationTrace",
    "PhaseCell",
    "RunResult",
    "SolverConfig",
    "SparseCoefficientBatch",
    "SparseVector",
    "SweepGrid",
    "TerminationReason",
    "align_coefficient_rows",
    "align_dictionary",
    "baseline_config",
    "check_closeness",
    "column_errors",
    "derive_R",
    "empirical_gradient",
    "estimate_coefficients",
    "fit_error",
    "generate_batch",
    "generate_ground_truth",
    "gradient_step",
    "hard_threshold",
    "iht_step",
    "incoherence",
    "load_config",
    "match_atoms",
    "normalize_columns",
    "perturb_dictionary",
    "preset",
    "preset_names",
    "rel_frobenius",
    "run_biased_baseline",
    "run_convergence",
    "run_experiment",
    "run_noodl",
    "run_noodl_with_data",
    "run_phase_transition",
    "save_config",
    "spectral_norm",
    "support_accuracy",
    "__version__",
]
