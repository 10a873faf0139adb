"""Time-frequency audio inpainting with a phase-corrected variation prior."""

from .evaluate import (
    DEFAULT_LAMBDA_GRID,
    EvalRecord,
    compare_methods,
    make_test_signal,
    snr,
    sweep_iterations,
    sweep_lambda,
    synthetic_suite,
)
from .phase_prior import (
    IFMatrix,
    VariationMatrix,
    correction_factors,
    estimate_if,
    ipctv_value,
    phase_correct,
    phase_correct_adjoint,
    time_variation,
    time_variation_adjoint,
)
from .pipeline import (
    METHODS,
    ColumnMask,
    ContextError,
    GapSegment,
    apply_mask,
    extract_segment,
    find_gaps,
    inpaint_spectrogram,
    make_mask,
    peak_normalize,
)
from .prox import (
    Thresholder,
    default_thresholder,
    p_shrinkage,
    project_feasible,
    prox_conjugate,
    prox_l2_block,
    prox_l2_squared,
    smooth_hard,
    soft_threshold,
)
from .solver import (
    DivergenceError,
    SolverConfig,
    SolverState,
    bphain_tf,
    cpa_tf_only,
    default_window,
    gcpa_inner,
    initial_state,
    operator_norm_estimate,
    uphain_tf,
)
from .stft import (
    Spectrogram,
    StftConfig,
    Window,
    analyze,
    make_hann,
    make_hann_derivative,
    symmetry_residual,
    synthesize,
    tight_window,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_LAMBDA_GRID",
    "EvalRecord",
    "compare_methods",
    "make_test_signal",
    "snr",
    "sweep_iterations",
    "sweep_lambda",
    "synthetic_suite",
    "IFMatrix",
    "VariationMatrix",
    "correction_factors",
    "estimate_if",
    "ipctv_value",
    "phase_correct",
    "phase_correct_adjoint",
    "time_variation",
    "time_variation_adjoint",
    "METHODS",
    "ColumnMask",
    "ContextError",
    "GapSegment",
    "apply_mask",
    "extract_segment",
    "find_gaps",
    "inpaint_spectrogram",
    "make_mask",
    "peak_normalize",
    "Thresholder",
    "default_thresholder",
    "p_shrinkage",
    "project_feasible",
    "prox_conjugate",
    "prox_l2_block",
    "prox_l2_squared",
    "smooth_hard",
    "soft_threshold",
    "DivergenceError",
    "SolverConfig",
    "SolverState",
    "bphain_tf",
    "cpa_tf_only",
    "default_window",
    "gcpa_inner",
    "initial_state",
    "operator_norm_estimate",
    "uphain_tf",
    "Spectrogram",
    "StftConfig",
    "Window",
    "analyze",
    "make_hann",
    "make_hann_derivative",
    "symmetry_residual",
    "synthesize",
    "tight_window",
    "__version__",
]
