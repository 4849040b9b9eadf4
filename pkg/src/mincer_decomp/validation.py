"""Baselines, inequality indices and synthetic data for checking the method.

Synthetic wages follow the random-coefficient model

    w = x'beta + x'c (u - 1/2),   u ~ U(0, 1) independent of x,

so that the true dispersion matrix is ``Omega = c c' / 12``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .estimators import fit_ols
from .model_frame import ObservationTable, shift_education

EDUCATION_LAWS = ("uniform_int", "uniform", "triangular")
CONTROL_LAWS = ("normal", "bernoulli", "uniform")


@dataclass(frozen=True)
class SyntheticSpec:
    """Population model for synthetic microdata.

    ``education_law`` is ``(label, params)`` with label one of
    ``uniform_int`` (low, high inclusive), ``uniform`` (low, high) or
    ``triangular`` (low, mode, high).  ``control_laws`` holds one
    ``(label, params)`` per control: ``normal`` (mean, sd), ``bernoulli``
    (p) or ``uniform`` (low, high).
    """

    n: int
    seed: int
    beta: tuple
    gamma_loadings: tuple
    education_law: tuple = ("uniform_int", {"low": 0, "high": 17})
    control_laws: tuple = field(default=())

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        c = np.asarray(self.gamma_loadings, dtype=float)
        p = 3 + len(self.control_laws)
        if beta.shape != (p,) or c.shape != (p,):
            raise DataError(f"beta and gamma_loadings need {p} entries")
        if self.n < 1:
            raise DataError("n must be positive")
        _education_support(self.education_law)
        for law in self.control_laws:
            _control_support(law)
        _check_monotone(self)

    @property
    def omega(self):
        c = np.asarray(self.gamma_loadings, dtype=float)
        return np.outer(c, c) / 12.0


def _education_support(law):
    label, params = law
    if label not in EDUCATION_LAWS:
        raise DataError(f"unknown education law {label!r}")
    try:
        if label == "triangular":
            lo, mode, hi = params["low"], params["mode"], params["high"]
            ok = lo <= mode <= hi and lo < hi
        else:
            lo, hi = params["low"], params["high"]
            ok = lo < hi if label == "uniform" else lo <= hi
    except KeyError as exc:
        raise DataError(f"education law {label!r} is missing {exc}") from exc
    if not ok or lo < 0:
        raise DataError(f"invalid parameters for education law {label!r}: {params}")
    return float(lo), float(hi)


def _control_support(law):
    label, params = law
    if label not in CONTROL_LAWS:
        raise DataError(f"unknown control law {label!r}")
    try:
        if label == "normal":
            if params["sd"] <= 0:
                raise DataError("normal control needs sd > 0")
            return -np.inf, np.inf
        if label == "bernoulli":
            if not 0 < params["p"] < 1:
                raise DataError("bernoulli control needs 0 < p < 1")
            return 0.0, 1.0
        if not params["low"] < params["high"]:
            raise DataError("uniform control needs low < high")
        return float(params["low"]), float(params["high"])
    except KeyError as exc:
        raise DataError(f"control law {label!r} is missing {exc}") from exc


def _check_monotone(spec):
    """Require x'c >= 0 on the support so every quantile is increasing in u."""
    c = np.asarray(spec.gamma_loadings, dtype=float)
    lo, hi = _education_support(spec.education_law)
    hs = [lo, hi]
    if c[2] != 0:
        vertex = -c[1] / (2 * c[2])
        if lo < vertex < hi:
            hs.append(vertex)
    worst = min(c[0] + c[1] * h + c[2] * h * h for h in hs)
    for cq, law in zip(c[3:], spec.control_laws):
        if cq == 0:
            continue
        zlo, zhi = _control_support(law)
        if not (np.isfinite(zlo) and np.isfinite(zhi)):
            raise DataError("heterogeneity loading on an unbounded control breaks monotonicity")
        worst += min(cq * zlo, cq * zhi)
    if worst < 0:
        raise DataError(f"x'c takes the negative value {worst:.4g} on the support; "
                        "quantiles would not be monotone in u")


def _draw_education(law, n, rng):
    label, params = law
    if label == "uniform_int":
        return rng.integers(params["low"], params["high"] + 1, size=n).astype(float)
    if label == "uniform":
        return rng.uniform(params["low"], params["high"], size=n)
    return rng.triangular(params["low"], params["mode"], params["high"], size=n)


def _draw_control(law, n, rng):
    label, params = law
    if label == "normal":
        return rng.normal(params["mean"], params["sd"], size=n)
    if label == "bernoulli":
        return (rng.random(n) < params["p"]).astype(float)
    return rng.uniform(params["low"], params["high"], size=n)


def generate_synthetic(spec):
    """Draw a table from the random-coefficient wage model."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n
    h = _draw_education(spec.education_law, n, rng)
    z = np.column_stack([_draw_control(law, n, rng) for law in spec.control_laws]) \
        if spec.control_laws else np.empty((n, 0))
    u = rng.random(n)
    X = np.column_stack([np.ones(n), h, h * h, z])
    w = X @ np.asarray(spec.beta, float) + (X @ np.asarray(spec.gamma_loadings, float)) * (u - 0.5)
    return ObservationTable(w, h, z)


# Education runs over 1..17 in the presets so that x'c > 0 everywhere: with
# h = 0 allowed, the case-3 model would put an exact-fit mass at h = 0.
CASE_PRESETS = {
    1: dict(beta=(1.5, 0.08, 0.0), gamma_loadings=(0.6, 0.0, 0.0)),
    2: dict(beta=(1.5, 0.0, 0.005), gamma_loadings=(0.6, 0.0, 0.0)),
    3: dict(beta=(1.5, 0.03, 0.0), gamma_loadings=(0.0, 0.04, 0.004)),
}
PRESET_EDUCATION = ("uniform_int", {"low": 1, "high": 17})


def case_spec(case, n=50_000, seed=0):
    """Synthetic spec for linear homoskedastic (1), quadratic homoskedastic
    (2) or linear heteroskedastic (3) wages."""
    if case not in CASE_PRESETS:
        raise DataError(f"case must be 1, 2 or 3, got {case!r}")
    return SyntheticSpec(n=n, seed=seed, education_law=PRESET_EDUCATION, **CASE_PRESETS[case])


def variance_of_logs(w):
    w = np.asarray(w, dtype=float)
    if w.size == 0:
        raise DataError("variance of an empty vector")
    return float(np.var(w))


def gini(levels):
    """Gini index via the sorted-rank formula, O(n log n).

    Equal to the mean absolute pairwise difference over twice the mean.
    """
    x = np.sort(np.asarray(levels, dtype=float))
    n = x.size
    if n == 0:
        raise DataError("Gini of an empty vector")
    if x[0] <= 0:
        raise DataError("Gini needs strictly positive values")
    ranks = 2 * np.arange(1, n + 1) - n - 1
    return float(ranks @ x / (n * n * x.mean()))


def simulate_location_shift(design, fit, eps=0.01):
    """Variance change from shifting schooling in the OLS prediction.

    Counterfactual log wages are the shifted-design prediction plus the
    original OLS residuals; returns ``[Var(w_s) - Var(w)] / eps``.
    """
    if not eps > 0:
        raise DataError("eps must be positive")
    shifted = shift_education(design, eps)
    w_s = shifted.X @ fit.beta + fit.residuals
    return (np.var(w_s) - np.var(design.w)) / eps


def rif_variance_effect(design):
    """Unconditional effect of schooling on the variance by RIF regression.

    Regresses ``(w - mean(w))**2`` on the design and applies the chain rule
    through the constructed square: ``g_h + 2 E(h) g_h2``.
    """
    w = design.w
    rif = (w - w.mean()) ** 2
    g = fit_ols(design.with_response(rif)).beta
    return float(g[1] + 2.0 * design.X[:, 1].mean() * g[2])


def _poly_ok(coefs, lo, hi, min_deriv_order):
    """Derivatives of order 1..min_deriv_order are >= 0 on [lo, hi]."""
    poly = np.polynomial.Polynomial(coefs)
    xs = np.linspace(lo, hi, 2001)
    for k in range(1, min_deriv_order + 1):
        vals = poly.deriv(k)(xs)
        if np.any(vals < -1e-12 * (1 + np.abs(vals).max())):
            return False
    return True


def a1_variance_curve(dgp, eps_list, n=200_000, seed=0):
    """Simulated Var(Y) at each location shift, with common random numbers.

    ``dgp`` is ``(label, params)``:

    ``("convex_mean", {"f": coefs, "low": a, "high": b})``
        ``Y = f(X + eps)``, ``X ~ U(a, b)``, ``f`` a polynomial (ascending
        coefficients) that must be increasing and convex on the shifted
        support.
    ``("hetero_linear", {"a0", "a1", "b": coefs, "low", "high"})``
        ``Y = a0 + a1 (X + eps) + b(X + eps) (U - 1/2)``, with ``b`` a
        polynomial that must be positive and nondecreasing on the support.
    """
    label, params = dgp
    eps = np.asarray(eps_list, dtype=float)
    try:
        lo, hi = float(params["low"]), float(params["high"])
    except KeyError as exc:
        raise DataError(f"dgp {label!r} is missing {exc}") from exc
    if not lo < hi:
        raise DataError("dgp support needs low < high")
    slo, shi = lo + min(eps.min(), 0.0), hi + max(eps.max(), 0.0)
    rng = np.random.default_rng(seed)
    x = rng.uniform(lo, hi, size=n)

    if label == "convex_mean":
        f = np.polynomial.Polynomial(params["f"])
        if not _poly_ok(params["f"], slo, shi, 2):
            raise DataError("f must be increasing and convex on the support")
        return np.array([np.var(f(x + e)) for e in eps])

    if label == "hetero_linear":
        b = np.polynomial.Polynomial(params["b"])
        if not _poly_ok(params["b"], slo, shi, 1) or b(slo) <= 0:
            raise DataError("b must be positive and nondecreasing on the support")
        g = rng.random(n) - 0.5
        a0, a1 = float(params["a0"]), float(params["a1"])
        return np.array([np.var(a0 + a1 * (x + e) + b(x + e) * g) for e in eps])

    raise DataError(f"unknown dgp {label!r}")


def derivative_oracle(design, beta, omega, eps=1e-4, convention="population"):
    """Central finite difference of the inequality level under a schooling shift.

    Moments are recomputed from the shifted designs, so this checks the
    analytic ``dE`` and ``dV`` without sharing any code path with them.
    """
    from .decomposition import compute_moments, inequality_level

    up = compute_moments(shift_education(design, eps), convention)
    down = compute_moments(shift_education(design, -eps), convention)
    return (inequality_level(beta, omega, up) - inequality_level(beta, omega, down)) / (2 * eps)
