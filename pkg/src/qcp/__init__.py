"""Quantized canonical polyadic (QCP) compression of sampled functions.

A vector of 2**L function samples is folded into an order-L tensor with
two entries per mode and approximated by a rank-r canonical sum, so the
whole vector is carried by 2*L*r parameters.  Fitting runs through
alternating least squares, either on the full vector or on a small set of
sampled entries (sparse interpolation).
"""

from .als import (
    AlsConfig,
    AlsReport,
    RegularizationPolicy,
    SpdSolveError,
    als_fit,
    random_init,
    solve_spd,
)
from .cpmodel import (
    CpModel,
    error_metrics,
    eval_entry,
    exp_rank1_model,
    load_model,
    max_error,
    model_from_dict,
    model_to_dict,
    reconstruct,
    save_model,
)
from .experiments import (
    ExperimentRow,
    FunctionSpec,
    fit_function,
    generate_samples,
    interp_function,
    run_table,
    scaling_probe,
    write_csv,
)
from .multilinear import (
    FlopCounter,
    gram_chain,
    hadamard,
    khatri_rao,
    kronecker,
    mttkrp_chain,
)
from .quantize import (
    QuantizedVector,
    linear_to_multi,
    mode_slice,
    multi_index_rows,
    multi_to_linear,
)
from .sparse import (
    ModePartition,
    SampleSet,
    als_sparse_fit,
    build_reduced_design,
    partition_by_mode,
    sample_points,
    sampled_objective,
)

__all__ = [
    "AlsConfig",
    "AlsReport",
    "CpModel",
    "ExperimentRow",
    "FlopCounter",
    "FunctionSpec",
    "ModePartition",
    "QuantizedVector",
    "RegularizationPolicy",
    "SampleSet",
    "SpdSolveError",
    "als_fit",
    "als_sparse_fit",
    "build_reduced_design",
    "error_metrics",
    "eval_entry",
    "exp_rank1_model",
    "fit_function",
    "generate_samples",
    "gram_chain",
    "hadamard",
    "interp_function",
    "khatri_rao",
    "kronecker",
    "linear_to_multi",
    "load_model",
    "max_error",
    "mode_slice",
    "model_from_dict",
    "model_to_dict",
    "mttkrp_chain",
    "multi_index_rows",
    "multi_to_linear",
    "partition_by_mode",
    "random_init",
    "reconstruct",
    "run_table",
    "sample_points",
    "sampled_objective",
    "save_model",
    "scaling_probe",
    "solve_spd",
    "write_csv",
]

__version__ = "0.1.0"
