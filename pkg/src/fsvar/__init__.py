"""State-switching factor VAR models for high-dimensional directed connectivity.

Pipeline: PCA factor extraction with BIC model selection (factor_pca),
switching Kalman filter/smoother with EM over per-regime factor dynamics
(sskf), and per-regime connectivity reconstruction with significance tests
(connectivity). simgen, baseline and metrics hold the simulation study;
cli ties everything together.
"""

from .baseline import fit_kmeans_baseline, kmeans_l1, sliding_ridge_tvvar
from .connectivity import (
    RegimeConnectivity,
    coeff_significance,
    coupled_estimator,
    decoupled_estimator,
    threshold_graph,
)
from .factor_pca import FactorModelFit, VARCoeffs, estimate_pca, fit_var_ls, select_num_factors
from .metrics import BenchmarkRecord, frob_error, state_accuracy
from .simgen import GroundTruth, SimScenario, gen_block_var_coeffs, simulate_switching_var
from .sskf import (
    EMConfig,
    InferenceResult,
    SwitchingSSM,
    build_ssm,
    decode_states,
    em_fit,
    skf_filter,
    sks_smooth,
)
from .tsdata import Dataset, concatenate, load_csv, save_csv, standardize

__version__ = "0.1.0"

__all__ = [
    "BenchmarkRecord",
    "Dataset",
    "EMConfig",
    "FactorModelFit",
    "GroundTruth",
    "InferenceResult",
    "RegimeConnectivity",
    "SimScenario",
    "SwitchingSSM",
    "VARCoeffs",
    "build_ssm",
    "coeff_significance",
    "concatenate",
    "coupled_estimator",
    "decode_states",
    "decoupled_estimator",
    "em_fit",
    "estimate_pca",
    "fit_kmeans_baseline",
    "fit_var_ls",
    "frob_error",
    "gen_block_var_coeffs",
    "kmeans_l1",
    "load_csv",
    "save_csv",
    "select_num_factors",
    "simulate_switching_var",
    "skf_filter",
    "sks_smooth",
    "sliding_ridge_tvvar",
    "standardize",
    "state_accuracy",
    "threshold_graph",
]
