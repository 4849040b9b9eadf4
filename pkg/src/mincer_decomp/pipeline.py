"""End-to-end estimation: OLS, quantile grid, Omega, moments, decomposition."""
from __future__ import annotations

from dataclasses import dataclass

from .decomposition import compute_moments, decompose
from .estimators import QuantileGrid, estimate_omega, fit_ols, fit_profile
from .model_frame import build_design


@dataclass(frozen=True)
class PipelineResult:
    design: object
    mean_fit: object
    profile: object
    omega: object
    moments: object
    decomposition: object


def estimate_design(design, grid=None, convention="population", workers=None):
    grid = grid or QuantileGrid.uniform()
    mean_fit = fit_ols(design)
    profile = fit_profile(design, grid, workers=workers)
    omega = estimate_omega(profile, mean_fit)
    moments = compute_moments(design, convention)
    result = decompose(mean_fit.beta, omega, moments)
    return PipelineResult(design, mean_fit, profile, omega, moments, result)


def estimate(table, spec=None, grid=None, convention="population", workers=None):
    """Run the whole decomposition on an :class:`ObservationTable`."""
    return estimate_design(build_design(table, spec), grid, convention, workers)
