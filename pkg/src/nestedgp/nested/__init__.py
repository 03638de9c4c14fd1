"""Moments of the nested predictor ``y2(y1(x1), x2)``."""
from ..polyexp import (IntegrabilityError, PolyExpSum, gaussian_poly_exp_mean,
                       poly_exp_product)
from .analytic import AnalyticEngine, AnalyticUnavailable, nested_moments_analytic
from .linearized import LinearizedNestedModel, linearize, linearized_phi_law_moments
from .mc import nested_moments_mc
from .predictor import (Analytic, GaussHermite, Linearized, MonteCarlo, NestedMoments,
                        NestedPredictor, split_nested)

__all__ = [
    "Analytic", "AnalyticEngine", "AnalyticUnavailable", "GaussHermite", "IntegrabilityError",
    "Linearized", "LinearizedNestedModel", "MonteCarlo", "NestedMoments", "NestedPredictor",
    "PolyExpSum", "gaussian_poly_exp_mean", "linearize", "linearized_phi_law_moments", "nested_moments_analytic",
    "nested_moments_mc", "poly_exp_product", "split_nested",
]
