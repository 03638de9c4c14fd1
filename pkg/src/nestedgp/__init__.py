"""Gaussian-process surrogates and sequential designs for two nested computer codes."""
from .design import (Box, CandidateSet, CostModel, DesignState, criterion_best,
                     criterion_chained, integrated_variance, maximin_lhs, run_sequential)
from .gp import (Dataset, KrigingModel, SearchConfig, TrendBasis, fit_hyperparameters,
                 loo_log_pred_prob, uk_cov, uk_fit, uk_mean_grad_phi1, uk_predict,
                 variance_after_obs)
from .kernels import Family, KernelConfig
from .nested import (Analytic, GaussHermite, Linearized, MonteCarlo, NestedPredictor,
                     gaussian_poly_exp_mean, nested_moments_analytic, nested_moments_mc)
from .testcases import (CodePair, HydroParams, ValidationSet, analytical_codes, blind_box_fit,
                        error_on_mean, hydro_codes)

__version__ = "0.1.0"

__all__ = [
    "Analytic", "Box", "CandidateSet", "CodePair", "CostModel", "Dataset", "DesignState",
    "Family", "GaussHermite", "HydroParams", "KernelConfig", "KrigingModel", "Linearized",
    "MonteCarlo", "NestedPredictor", "SearchConfig", "TrendBasis", "ValidationSet",
    "analytical_codes", "blind_box_fit", "criterion_best", "criterion_chained", "error_on_mean",
    "fit_hyperparameters", "gaussian_poly_exp_mean", "hydro_codes", "integrated_variance",
    "loo_log_pred_prob", "maximin_lhs", "nested_moments_analytic", "nested_moments_mc",
    "run_sequential", "uk_cov", "uk_fit", "uk_mean_grad_phi1", "uk_predict",
    "variance_after_obs",
]
