"""Covariate moments, their location-shift derivatives, and the decomposition.

With ``W = X'beta + X'gamma(U)`` and ``Omega = Var[gamma(U)]`` the variance of
log wages is

    I = beta' V beta + tr(Omega V) + E' Omega E

and a marginal shift of schooling ``h -> h + eps`` changes it by

    dI = beta' dV beta  +  tr(Omega dV) + 2 E' Omega dE
         '-- between --'   '---------- within ---------'

where ``E`` and ``V`` are the mean vector and covariance matrix of the
regressors and ``dE``, ``dV`` their derivatives with respect to the shift.
Because the regressors are ``[1, h, h², z]`` the derivatives follow from
``d Cov(h^j, h^k) = k Cov(h^j, h^(k-1)) + j Cov(h^(j-1), h^k)`` and
``d Cov(h^k, z) = k Cov(h^(k-1), z)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DataError

CONVENTIONS = ("population", "sample")
SHARE_EPS = 1e-12


@dataclass(frozen=True)
class MomentSet:
    E: np.ndarray
    V: np.ndarray
    dE: np.ndarray
    dV: np.ndarray
    moment_convention: str = "population"


@dataclass(frozen=True)
class DecompositionResult:
    inequality_level: float
    ef_between: float
    ef_within: float
    total: float
    share_between: Optional[float]
    share_within: Optional[float]

    def as_dict(self):
        return {"inequality_level": self.inequality_level, "between": self.ef_between,
                "within": self.ef_within, "total": self.total,
                "share_between": self.share_between, "share_within": self.share_within}


def _omega_array(omega):
    return np.asarray(getattr(omega, "omega", omega), dtype=float)


def shift_derivatives(E, V):
    """``dE`` and ``dV`` for a unit location shift of column 1 (schooling).

    Only entries involving the squared column move: dV[1,2] = 2 V11,
    dV[2,2] = 4 V12, dV[2,z] = 2 Cov(h, z).  Everything in the intercept row,
    the h row outside (1,2), and the z-z block is zero.
    """
    p = len(E)
    dE = np.zeros(p)
    dE[1] = 1.0
    dE[2] = 2.0 * E[1]
    dV = np.zeros((p, p))
    dV[1, 2] = dV[2, 1] = 2.0 * V[1, 1]
    dV[2, 2] = 4.0 * V[1, 2]
    dV[2, 3:] = dV[3:, 2] = 2.0 * V[1, 3:]
    return dE, dV


def compute_moments(design, convention="population"):
    """Means, covariances and shift derivatives of the regressors.

    ``convention`` picks the covariance denominator: ``"population"`` (1/n)
    or ``"sample"`` (1/(n-1)).
    """
    if convention not in CONVENTIONS:
        raise DataError(f"convention must be one of {CONVENTIONS}, got {convention!r}")
    X = design.X
    n, p = X.shape
    if p < 3:
        raise DataError("moments need the [1, h, h², z...] layout")
    if convention == "sample" and n < 2:
        raise DataError("sample covariances need n >= 2")
    E = X.mean(axis=0)
    C = X - E
    V = C.T @ C / (n if convention == "population" else n - 1)
    V = (V + V.T) / 2
    V[0, :] = V[:, 0] = 0.0
    dE, dV = shift_derivatives(E, V)
    return MomentSet(E, V, dE, dV, convention)


def _check_dims(beta, omega, moments):
    p = len(moments.E)
    if beta.shape != (p,) or omega.shape != (p, p):
        raise DataError(f"dimension mismatch: beta {beta.shape}, omega {omega.shape}, p={p}")


def inequality_terms(beta, omega, moments):
    """The three terms ``beta'V beta``, ``tr(Omega V)`` and ``E'Omega E``."""
    beta = np.asarray(beta, dtype=float)
    omega = _omega_array(omega)
    _check_dims(beta, omega, moments)
    E, V = moments.E, moments.V
    return (float(beta @ V @ beta), float(np.trace(omega @ V)), float(E @ omega @ E))


def inequality_level(beta, omega, moments):
    """Variance of log wages implied by the mean and quantile coefficients."""
    return sum(inequality_terms(beta, omega, moments))


def decompose(beta, omega, moments):
    """Split the marginal effect of schooling on inequality.

    Returns a :class:`DecompositionResult`; ``total`` is always computed as
    ``ef_between + ef_within``.  Shares are ``component / total`` and are
    ``None`` when ``|total| < 1e-12``.
    """
    beta = np.asarray(beta, dtype=float)
    omega = _omega_array(omega)
    _check_dims(beta, omega, moments)
    dE, dV, E = moments.dE, moments.dV, moments.E
    between = float(beta @ dV @ beta)
    within = float(np.sum(omega * dV.T) + 2.0 * E @ omega @ dE)
    total = between + within
    if abs(total) < SHARE_EPS:
        share_b = share_w = None
    else:
        share_b, share_w = between / total, within / total
    return DecompositionResult(inequality_level(beta, omega, moments),
                               between, within, total, share_b, share_w)


def closed_form_simple(beta, omega, scalar_moments):
    """Between and within effects for ``X = [1, h, h²]`` in scalar form.

    ``scalar_moments`` is ``(E1, E2, E3, V11, V12)`` with ``Ek = E(h^k)``,
    under the population convention.
    """
    b = np.asarray(beta, dtype=float)
    O = _omega_array(omega)
    if b.shape != (3,) or O.shape != (3, 3):
        raise DataError("closed form applies only to X = [1, h, h²]")
    E1, E2, E3, V11, V12 = scalar_moments
    between = 4.0 * (b[1] * V11 + b[2] * V12) * b[2]
    within = 2.0 * (O[0, 1] + 2.0 * O[0, 2] * E1 + 3.0 * O[1, 2] * E2
                    + O[1, 1] * E1 + 2.0 * O[2, 2] * E3)
    return float(between), float(within)


def scalar_moments(design):
    """``(E1, E2, E3, V11, V12)`` of schooling, population convention."""
    h = design.X[:, 1]
    E1, E2, E3 = h.mean(), (h ** 2).mean(), (h ** 3).mean()
    return E1, E2, E3, E2 - E1 ** 2, E3 - E1 * E2


_CASE_KEYS = {
    1: {"beta2": "zero", "omega00": "any"},
    2: {"beta2": "any", "V12": "any", "beta1": "zero", "omega00": "any"},
    3: {"omega11": "any", "omega22": "any", "E1": "any", "E3": "any",
        "beta2": "zero", "omega01": "zero", "omega02": "zero", "omega12": "zero"},
}
_CASE_REQUIRED = {1: (), 2: ("beta2", "V12"), 3: ("omega11", "omega22", "E1", "E3")}


def case_formulas(case, **params):
    """(between, within) for the three textbook cases.

    1. linear homoskedastic: both zero;
    2. quadratic homoskedastic: ``(4 V12 beta2**2, 0)``; exact only when
       ``beta1 = 0``, so a nonzero ``beta1`` is rejected;
    3. linear heteroskedastic with diagonal Omega:
       ``(0, 2 omega11 E1 + 4 omega22 E3)``.

    Parameters outside a case's allowed set, or restricted parameters that
    are nonzero, raise :class:`DataError`.
    """
    if case not in _CASE_KEYS:
        raise DataError(f"case must be 1, 2 or 3, got {case!r}")
    allowed = _CASE_KEYS[case]
    for key, val in params.items():
        if key not in allowed:
            raise DataError(f"case {case} does not take parameter {key!r}")
        if allowed[key] == "zero" and val != 0:
            raise DataError(f"case {case} requires {key} = 0, got {val}")
    missing = [k for k in _CASE_REQUIRED[case] if k not in params]
    if missing:
        raise DataError(f"case {case} needs {missing}")
    if case == 1:
        return 0.0, 0.0
    if case == 2:
        return 4.0 * params["V12"] * params["beta2"] ** 2, 0.0
    return 0.0, 2.0 * params["omega11"] * params["E1"] + 4.0 * params["omega22"] * params["E3"]
