"""Mean and quantile regressions, and the mean-quantile dispersion matrix.

``fit_ols`` estimates the conditional mean coefficients, ``fit_profile`` the
quantile coefficients over a trimmed uniform grid of quantile indexes, and
``estimate_omega`` averages the outer products of their differences:

    Omega_hat = M^-1 sum_m (alpha(tau_m) - beta)(alpha(tau_m) - beta)'
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import partial

import numpy as np

from ._parallel import ordered_map
from ._rqsolve import check_loss, solve_rq
from .errors import ConvergenceError, DataError, NumericalError

DEFAULT_TRIM = 0.005
DEFAULT_MESH = 0.005
ORACLE_MAX_N = 15
ORACLE_MAX_P = 4


@dataclass(frozen=True)
class MeanFit:
    beta: np.ndarray
    residuals: np.ndarray
    fitted: np.ndarray


@dataclass(frozen=True)
class QuantileGrid:
    """Equally spaced quantile indexes from ``trim`` to ``1 - trim``."""

    taus: np.ndarray
    trim: float
    mesh: float

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        if taus.ndim != 1 or len(taus) < 1:
            raise DataError("quantile grid must be a nonempty vector")
        if not 0 < self.trim < 0.5:
            raise DataError(f"trim must lie in (0, 0.5), got {self.trim}")
        if abs(taus[0] - self.trim) > 1e-12 or abs(taus[-1] - (1 - self.trim)) > 1e-12:
            raise DataError("grid endpoints must be trim and 1 - trim")
        if len(taus) > 1:
            steps = np.diff(taus)
            if np.any(steps <= 0) or np.max(np.abs(steps - self.mesh)) > 1e-12:
                raise DataError("grid must be strictly increasing with uniform spacing")
        object.__setattr__(self, "taus", taus)

    @classmethod
    def uniform(cls, trim=DEFAULT_TRIM, mesh=DEFAULT_MESH):
        if not 0 < trim < 0.5:
            raise DataError(f"trim must lie in (0, 0.5), got {trim}")
        if mesh <= 0:
            raise DataError(f"mesh must be positive, got {mesh}")
        steps = (1 - 2 * trim) / mesh
        M = int(round(steps)) + 1
        if abs(steps - (M - 1)) > 1e-9:
            raise DataError(f"mesh {mesh} does not divide [{trim}, {1 - trim}] evenly")
        taus = trim + mesh * np.arange(M)
        taus[-1] = 1 - trim
        return cls(np.round(taus, 12), trim, mesh)

    @classmethod
    def parse(cls, text):
        """Parse ``"lo:hi:step"`` (e.g. ``"0.005:0.995:0.005"``)."""
        try:
            lo, hi, step = (float(v) for v in text.split(":"))
        except ValueError as exc:
            raise DataError(f"grid must look like lo:hi:step, got {text!r}") from exc
        if abs(lo + hi - 1) > 1e-12:
            raise DataError(f"grid must be symmetric (lo = 1 - hi), got {text!r}")
        return cls.uniform(lo, step)

    @property
    def M(self):
        return len(self.taus)


@dataclass(frozen=True)
class QuantileProfile:
    grid: QuantileGrid
    alpha: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 2 or alpha.shape[0] != self.grid.M:
            raise DataError("profile needs one coefficient row per grid point")
        if not np.all(np.isfinite(alpha)):
            raise NumericalError("non-finite quantile coefficients")
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class GammaCovariance:
    omega: np.ndarray


def fit_ols(design):
    """Least squares via a Householder QR factorization of X."""
    Q, R = np.linalg.qr(design.X)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-13 * diag.max():
        raise NumericalError("normal equations are numerically singular")
    beta = np.linalg.solve(R, Q.T @ design.w)
    fitted = design.X @ beta
    return MeanFit(beta, design.w - fitted, fitted)


def fit_quantile(design, tau):
    """Koenker-Bassett regression quantile: minimizes sum rho_tau(w - X a)."""
    if not 0 < tau < 1:
        raise DataError(f"tau must lie in (0, 1), got {tau}")
    return solve_rq(design.X, design.w, float(tau))


def quantile_objective(design, alpha, tau):
    return check_loss(design.w - design.X @ alpha, tau)


def _fit_one(tau, X, w):
    try:
        return solve_rq(X, w, tau)
    except ConvergenceError as exc:
        raise ConvergenceError(f"quantile fit failed at tau={tau:g}: {exc}",
                               gap=exc.gap, tau=tau) from exc
    except NumericalError as exc:
        raise NumericalError(f"quantile fit failed at tau={tau:g}: {exc}") from exc


def fit_profile(design, grid=None, workers=None):
    """Fit every quantile on the grid; row ``m`` is the fit at ``taus[m]``."""
    grid = grid or QuantileGrid.uniform()
    fit = partial(_fit_one, X=design.X, w=design.w)
    rows = ordered_map(fit, [float(t) for t in grid.taus], workers)
    return QuantileProfile(grid, np.vstack(rows))


def estimate_omega(profile, mean_fit):
    """Average outer product of quantile-minus-mean coefficient gaps.

    Eigenvalues that come out marginally negative through rounding (above
    ``-1e-10 * trace``) are clipped to zero; anything more negative is an
    error.
    """
    beta = np.asarray(mean_fit.beta)
    if profile.alpha.shape[1] != beta.shape[0]:
        raise DataError(f"profile has {profile.alpha.shape[1]} coefficients, "
                        f"mean fit has {beta.shape[0]}")
    gaps = profile.alpha - beta
    omega = gaps.T @ gaps / len(gaps)
    omega = (omega + omega.T) / 2
    trace = np.trace(omega)
    vals, vecs = np.linalg.eigh(omega)
    if vals[0] < -1e-10 * trace:
        raise NumericalError(f"Omega is not positive semidefinite (min eigenvalue {vals[0]:.3g})")
    if vals[0] < 0:
        omega = (vecs * np.clip(vals, 0, None)) @ vecs.T
        omega = (omega + omega.T) / 2
    return GammaCovariance(omega)


def qr_oracle_smalln(design, tau):
    """Exact quantile regression by enumerating every p-point basis.

    Some optimal solution interpolates ``p`` observations, so the best exact
    fit over all ``p``-subsets is a global optimum.  Test use only.
    """
    n, p = design.X.shape
    if n > ORACLE_MAX_N or p > ORACLE_MAX_P:
        raise DataError(f"oracle budget is n <= {ORACLE_MAX_N}, p <= {ORACLE_MAX_P}; "
                        f"got n={n}, p={p}")
    X, w = design.X, design.w
    best, best_val = None, np.inf
    for idx in itertools.combinations(range(n), p):
        Xh = X[list(idx)]
        if np.linalg.cond(Xh) > 1e12:
            continue
        alpha = np.linalg.solve(Xh, w[list(idx)])
        val = check_loss(w - X @ alpha, tau)
        if val < best_val:
            best, best_val = alpha, val
    if best is None:
        raise NumericalError("every p-subset of the design is singular")
    return best
