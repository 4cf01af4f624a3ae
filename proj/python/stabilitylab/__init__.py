"""Python interface to the stability-lab core.

Measures sharpness of the empirical Fisher matrix through its n x n Gram
representation, checks SGD/GD stability predicates, trains the two model
families, and runs the norm-equivalence experiments.
"""

from ._core import (  # noqa: F401
    RngStream,
    ReluNetParams,
    DiagNetParams,
    Dataset,
    GramMatrix,
    SharpnessReport,
    StabilityVerdict,
    OptConfig,
    RunRecord,
    sym_eigenvalues,
    power_iteration_top,
    forward,
    per_example_gradient,
    path_norm,
    weighted_l2_norm,
    alpha_vector,
    effective_coefficients,
    balancedness,
    sample_sphere_inputs,
    sample_cube_inputs,
    make_relu_dataset,
    make_linear_dataset,
    gram_matrix,
    fisher_trace,
    fisher_frobenius,
    fisher_spectral,
    fisher_eigenvalues,
    noise_covariance_products,
    alignment_factor,
    rank_one_stability_gap,
    sharpness_report,
    check_linear_stability_trace,
    check_gd_stability,
    check_loss_stability,
    simulate_linearized_sgd,
    classify_minimum,
    clipped_gradient,
    empirical_risk,
    train,
    init_relu,
    init_diag,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
