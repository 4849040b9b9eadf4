"""Bootstrap standard errors and significance marks.

Every replicate reruns the whole estimation (OLS, quantile grid, Omega,
moments, decomposition) on a resampled table.  Replicate ``r`` draws from its
own generator seeded with ``(seed, r, attempt)``, and results are reduced by
replicate index, so the output does not depend on how many workers run it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np

from ._parallel import ordered_map
from .errors import DataError, NumericalError
from .estimators import QuantileGrid, fit_ols, fit_quantile
from .model_frame import build_design
from .pipeline import estimate_design
from .validation import rif_variance_effect, simulate_location_shift

MODES = ("pairs", "wild")
ATTEMPT_FACTOR = 5
SIM_EPS = 0.01
CRITICAL = ((2.576, "***"), (1.96, "**"), (1.645, "*"))


@dataclass(frozen=True)
class BootstrapConfig:
    """Bootstrap settings.

    ``mode="wild"`` keeps the regressors fixed and flips the signs of the
    OLS residuals with Rademacher weights.  It is exact for the mean stage
    and only approximate for the quantile stage.
    """

    replications: int = 200
    seed: int = 0
    mode: str = "pairs"
    grid: QuantileGrid = field(default_factory=QuantileGrid.uniform)
    convention: str = "population"

    def __post_init__(self):
        if int(self.replications) < 1:
            raise DataError(f"replications must be >= 1, got {self.replications}")
        if self.mode not in MODES:
            raise DataError(f"mode must be one of {MODES}, got {self.mode!r}")


@dataclass(frozen=True)
class BootstrapReport:
    point: object
    se_between: float
    se_within: float
    se_total: float
    replicate_matrix: np.ndarray
    stars_between: str
    stars_within: str
    stars_total: str
    simulation: float = float("nan")
    rif: float = float("nan")
    se_simulation: float = float("nan")
    se_rif: float = float("nan")
    attempts: int = 0


def significance_stars(estimate, se):
    """Two-sided normal-critical-value marks: ``***`` 1%, ``**`` 5%, ``*`` 10%."""
    if not se > 0:
        raise DataError(f"standard error must be positive, got {se}")
    t = abs(estimate / se)
    for crit, mark in CRITICAL:
        if t >= crit:
            return mark
    return ""


def _resample(table, design, mean_fit, mode, rng):
    if mode == "pairs":
        idx = rng.integers(0, table.n, size=table.n)
        return build_design(table.take(idx))
    signs = rng.integers(0, 2, size=table.n) * 2.0 - 1.0
    return design.with_response(mean_fit.fitted + signs * mean_fit.residuals)


def _replicate(r, table, design, mean_fit, cfg, max_attempts):
    """Statistics for replicate ``r``: (between, within, total, sim, rif), attempts."""
    for attempt in range(max_attempts):
        rng = np.random.default_rng([cfg.seed, r, attempt])
        try:
            d = _resample(table, design, mean_fit, cfg.mode, rng)
            res = estimate_design(d, cfg.grid, cfg.convention, workers=1)
            sim = simulate_location_shift(d, res.mean_fit, SIM_EPS)
            rif = rif_variance_effect(d)
        except (NumericalError, DataError):
            continue
        dec = res.decomposition
        return np.array([dec.ef_between, dec.ef_within, dec.total, sim, rif]), attempt + 1
    return None, max_attempts


def _run_replicates(func, B, workers):
    """Map ``func`` over replicate indexes and enforce the total-attempt cap."""
    out = ordered_map(func, range(B), workers)
    attempts = sum(a for _, a in out)
    if any(v is None for v, _ in out) or attempts > ATTEMPT_FACTOR * B:
        raise NumericalError(f"bootstrap needed more than {ATTEMPT_FACTOR * B} attempts "
                             f"for {B} replicates")
    return np.vstack([v for v, _ in out]), attempts


def _se(reps):
    if len(reps) < 2:
        raise DataError("standard errors need at least 2 replications")
    return reps.std(axis=0, ddof=1)


def bootstrap_decomposition(table, spec=None, cfg=None, workers=None, point=None):
    """Bootstrap the decomposition and the two baselines.

    ``point`` may carry an already computed :class:`PipelineResult` for the
    full sample.  Raises :class:`DataError` when ``B < 2`` because no
    standard error can be formed from a single replicate.
    """
    cfg = cfg or BootstrapConfig()
    B = int(cfg.replications)
    design = build_design(table, spec)
    if point is None:
        point = estimate_design(design, cfg.grid, cfg.convention, workers)
    if B < 2:
        raise DataError("standard errors need at least 2 replications")
    # one replicate may use up every spare attempt, the total is checked after
    func = partial(_replicate, table=table, design=design, mean_fit=point.mean_fit,
                   cfg=cfg, max_attempts=(ATTEMPT_FACTOR - 1) * B + 1)
    reps, attempts = _run_replicates(func, B, workers)
    se = _se(reps)
    dec = point.decomposition
    stars = [significance_stars(v, s) if s > 0 else ""
             for v, s in zip((dec.ef_between, dec.ef_within, dec.total), se[:3])]
    return BootstrapReport(
        point=dec, se_between=float(se[0]), se_within=float(se[1]), se_total=float(se[2]),
        replicate_matrix=reps[:, :3].copy(), stars_between=stars[0],
        stars_within=stars[1], stars_total=stars[2],
        simulation=simulate_location_shift(design, point.mean_fit, SIM_EPS),
        rif=rif_variance_effect(design), se_simulation=float(se[3]),
        se_rif=float(se[4]), attempts=attempts)


TABLE_TAUS = (0.10, 0.25, 0.50, 0.75, 0.90)


def _coefficients(design, taus):
    cols = [fit_ols(design).beta] + [fit_quantile(design, t) for t in taus]
    return np.column_stack(cols)


def _coef_replicate(r, table, taus, seed, max_attempts):
    for attempt in range(max_attempts):
        rng = np.random.default_rng([seed, r, attempt])
        try:
            idx = rng.integers(0, table.n, size=table.n)
            return _coefficients(build_design(table.take(idx)), taus).ravel(), attempt + 1
        except (NumericalError, DataError):
            continue
    return None, max_attempts


def bootstrap_coefficients(table, spec=None, taus=TABLE_TAUS, replications=200,
                           seed=0, workers=None):
    """OLS and quantile coefficients with pairs-bootstrap standard errors.

    Returns ``(coef, se)``, both ``p x (1 + len(taus))``; column 0 is OLS.
    ``se`` is ``None`` when ``replications`` is 0.
    """
    design = build_design(table, spec)
    coef = _coefficients(design, taus)
    if replications == 0:
        return coef, None
    B = int(replications)
    if B < 2:
        raise DataError("standard errors need at least 2 replications")
    func = partial(_coef_replicate, table=table, taus=tuple(taus), seed=seed,
                   max_attempts=(ATTEMPT_FACTOR - 1) * B + 1)
    reps, _ = _run_replicates(func, B, workers)
    return coef, _se(reps).reshape(coef.shape)
