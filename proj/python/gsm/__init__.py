"""Generalized score matching for non-negative data."""

from ._core import (
    DomainError,
    NumericError,
    asymptotic_variance,
    cramer_rao,
    estimate,
    estimate_mu,
    estimate_sigma2,
    multiplier_upper_bound,
    path_roc,
    simulate,
)

__all__ = [
    "DomainError",
    "NumericError",
    "asymptotic_variance",
    "cramer_rao",
    "estimate",
    "estimate_mu",
    "estimate_sigma2",
    "multiplier_upper_bound",
    "path_roc",
    "simulate",
]
