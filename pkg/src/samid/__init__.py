"""samid: identification of switched affine models from unlabeled noisy data."""

from .baselines import feature_cluster_labels, gpca_lite_fit, parameters_from_hdc_coefficients
from .errors import NumericalError
from .estimation import FitOptions, SubmodelEstimate, clairvoyant_fit, fit_submodels, tls_linear
from .experiments import (
    ExperimentConfig,
    MethodOptions,
    ResultRow,
    load_experiment_config,
    match_clusters,
    misclassification_ratio,
    parameter_mse,
    parse_experiment_config,
    run_monte_carlo,
    save_results_csv,
)
from .intersection import (
    HybridPolynomial,
    IntersectionPoint,
    estimate_intersection,
    fit_hdc_coefficients,
    intersection_oracle,
    monomial_basis,
    veronese_embed,
)
from .models import (
    Dataset,
    NoiseSpec,
    SwitchedAffineModel,
    SwitchingSpec,
    assign_labels,
    check_identifiability,
    first_coordinate_slabs,
    generate_inputs,
    load_dataset_csv,
    load_model_json,
    noise_for_target_snr,
    save_dataset_csv,
    save_model_json,
    simulate,
    snr_db,
)
from .subspace import (
    AdjacencyMatrix,
    RowSpace,
    SpectralEmbedding,
    adjacency,
    kmeans_rows,
    row_space,
    scs_label,
    spectral_embed,
)

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix",
    "Dataset",
    "ExperimentConfig",
    "FitOptions",
    "HybridPolynomial",
    "IntersectionPoint",
    "MethodOptions",
    "NoiseSpec",
    "NumericalError",
    "ResultRow",
    "RowSpace",
    "SpectralEmbedding",
    "SubmodelEstimate",
    "SwitchedAffineModel",
    "SwitchingSpec",
    "adjacency",
    "assign_labels",
    "check_identifiability",
    "clairvoyant_fit",
    "estimate_intersection",
    "feature_cluster_labels",
    "first_coordinate_slabs",
    "fit_hdc_coefficients",
    "fit_submodels",
    "generate_inputs",
    "gpca_lite_fit",
    "intersection_oracle",
    "kmeans_rows",
    "load_dataset_csv",
    "load_experiment_config",
    "load_model_json",
    "match_clusters",
    "misclassification_ratio",
    "monomial_basis",
    "noise_for_target_snr",
    "parameter_mse",
    "parameters_from_hdc_coefficients",
    "parse_experiment_config",
    "row_space",
    "run_monte_carlo",
    "save_dataset_csv",
    "save_model_json",
    "save_results_csv",
    "scs_label",
    "simulate",
    "snr_db",
    "spectral_embed",
    "tls_linear",
    "veronese_embed",
]
