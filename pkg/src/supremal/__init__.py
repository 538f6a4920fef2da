"""Finite-sample supremal tail bounds for sequences of convex M-estimators."""

__version__ = "0.1.0"

from .bounds import (
    BoundValue,
    TheoremId,
    chernoff_tail_bound,
    exp_tail_bound,
    hoeffding_sup_bound,
    poly_tail_bound,
    quantile_bounds,
    rate_certificates,
)
from .estimator import argmin_extremes, sequential_argmins
from .population import build_model, closed_form_K, criterion_derivative
from .presets import get_preset, list_presets
from .scores import build_score, loss_for

__all__ = [
    "BoundValue", "TheoremId", "chernoff_tail_bound", "exp_tail_bound", "hoeffding_sup_bound",
    "poly_tail_bound", "quantile_bounds", "rate_certificates", "argmin_extremes",
    "sequential_argmins", "build_model", "closed_form_K", "criterion_derivative",
    "get_preset", "list_presets", "build_score", "loss_for",
]
