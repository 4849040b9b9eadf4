"""Microdata ingestion and the fixed-layout Mincer design matrix.

The regressor layout is always ``[1, h, h**2, z_1, ..., z_Q]`` where ``h`` is
years of schooling.  The squared term is built here from the education column
and is never read from disk, so column 2 is exactly column 1 squared.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy.linalg import qr

from .errors import DataError, RankDeficientError

RANK_TOL = 1e-10

EDUCATION_COL = 1
EDUCATION_SQ_COL = 2


@dataclass(frozen=True)
class CovariateSpec:
    """Which CSV columns hold the wage, education and the controls."""

    wage_column: str
    education_column: str
    control_columns: tuple[str, ...] = ()
    wage_is_log: bool = True

    def __post_init__(self):
        object.__setattr__(self, "control_columns", tuple(self.control_columns))
        names = [self.wage_column, self.education_column, *self.control_columns]
        if len(set(names)) != len(names):
            raise DataError(f"column names must be distinct, got {names}")

    @property
    def columns(self):
        return [self.wage_column, self.education_column, *self.control_columns]


@dataclass(frozen=True)
class ObservationTable:
    """Clean microdata: log wages, years of education and control columns."""

    wage_log: np.ndarray
    education: np.ndarray
    controls: np.ndarray
    dropped_rows: int = 0
    control_names: tuple[str, ...] = ()

    def __post_init__(self):
        w = np.ascontiguousarray(self.wage_log, dtype=float)
        h = np.ascontiguousarray(self.education, dtype=float)
        z = np.asarray(self.controls, dtype=float)
        if z.ndim == 1:
            z = z.reshape(len(h), -1) if z.size else np.empty((len(h), 0))
        z = np.ascontiguousarray(z)
        if not (w.ndim == h.ndim == 1 and len(w) == len(h) == z.shape[0]):
            raise DataError("wage, education and controls must have matching rows")
        if len(w) < 1:
            raise DataError("table has no rows")
        for name, arr in (("wage", w), ("education", h), ("controls", z)):
            if not np.all(np.isfinite(arr)):
                raise DataError(f"non-finite values in {name}")
        names = tuple(self.control_names) or tuple(f"z{q + 1}" for q in range(z.shape[1]))
        if len(names) != z.shape[1]:
            raise DataError("control_names does not match the number of control columns")
        for arr in (w, h, z):
            arr.flags.writeable = False
        object.__setattr__(self, "wage_log", w)
        object.__setattr__(self, "education", h)
        object.__setattr__(self, "controls", z)
        object.__setattr__(self, "control_names", names)

    @property
    def n(self):
        return len(self.wage_log)

    def take(self, idx):
        """Row subset (used by the pairs bootstrap)."""
        idx = np.asarray(idx)
        return ObservationTable(self.wage_log[idx], self.education[idx],
                                self.controls[idx], 0, self.control_names)

    def with_wages(self, wage_log):
        return ObservationTable(wage_log, self.education, self.controls,
                                self.dropped_rows, self.control_names)


@dataclass(frozen=True)
class DesignMatrix:
    """Log-wage response ``w`` and regressors ``X``.

    Designs from :func:`build_design` have columns ``[1, h, h², z...]``; the
    estimators accept any full-rank ``X``.
    """

    w: np.ndarray
    X: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        w = np.array(self.w, dtype=float)
        if X.ndim != 2 or X.shape[1] < 1 or X.shape[0] != len(w):
            raise DataError(f"bad design shape {X.shape} for {len(w)} responses")
        X.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "w", w)
        if not self.names:
            base = ("const", "educ", "educ_sq")[:X.shape[1]]
            extra = tuple(f"z{q + 1}" for q in range(X.shape[1] - 3))
            object.__setattr__(self, "names", base + extra)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def education(self):
        return self.X[:, EDUCATION_COL]

    def with_response(self, w):
        return DesignMatrix(w, self.X, self.names)


def _parse_column(col):
    """Strings to floats, NaN where unparseable.

    pandas' fast parser can be off by one ulp, so the cells it accepts are
    converted again with numpy, which rounds correctly.
    """
    text = col.str.strip()
    num = pd.to_numeric(text, errors="coerce")
    ok = num.notna().to_numpy()
    out = np.full(len(col), np.nan)
    try:
        out[ok] = text.to_numpy()[ok].astype(float)
    except ValueError:
        out[ok] = num.to_numpy(dtype=float)[ok]
    return out


def load_table(path, spec):
    """Read a CSV file into an :class:`ObservationTable`.

    Rows with a missing, non-numeric or non-finite value in any selected
    column are dropped and counted (listwise deletion).  When
    ``spec.wage_is_log`` is false the wage must be strictly positive; rows
    with a non-positive wage are dropped and counted as well, and the
    remaining wages are log-transformed.
    """
    if not os.path.isfile(path):
        raise DataError(f"no such file: {path}")
    try:
        raw = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as exc:
        raise DataError(f"{path}: no header row") from exc
    missing = [c for c in spec.columns if c not in raw.columns]
    if missing:
        raise DataError(f"{path}: missing column(s) {missing}")

    n_raw = len(raw)
    values = np.column_stack([_parse_column(raw[c]) for c in spec.columns])
    keep = np.all(np.isfinite(values), axis=1)
    if not spec.wage_is_log:
        keep &= values[:, 0] > 0
    values = values[keep]
    if len(values) == 0:
        raise DataError(f"{path}: zero usable rows out of {n_raw}")

    wage = values[:, 0] if spec.wage_is_log else np.log(values[:, 0])
    return ObservationTable(wage, values[:, 1], values[:, 2:], n_raw - len(values),
                            spec.control_columns)


def write_table(table, path, spec=None):
    """Write a table in the CSV schema :func:`load_table` reads.

    Wages are written in logs; read them back with ``wage_is_log=True``.
    """
    spec = spec or CovariateSpec("w", "h", table.control_names)
    frame = pd.DataFrame({spec.wage_column: table.wage_log,
                          spec.education_column: table.education})
    for name, col in zip(spec.control_columns, table.controls.T):
        frame[name] = col
    frame.to_csv(path, index=False, float_format="%.17g")


def check_rank(X, tol=RANK_TOL):
    """Raise :class:`RankDeficientError` unless ``X`` has full column rank.

    Uses column-pivoted QR; a pivot smaller than ``tol`` times the largest
    one counts as zero.  Columns are scaled to unit norm first so that the
    test does not depend on the units of h versus h².
    """
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise RankDeficientError(f"all-zero column(s) {np.flatnonzero(norms == 0).tolist()}")
    R, piv = qr(X / norms, mode="r", pivoting=True)
    diag = np.abs(np.diag(R))
    if len(diag) < X.shape[1] or diag[-1] <= tol * diag[0]:
        bad = piv[len(diag[diag > tol * diag[0]]):].tolist()
        raise RankDeficientError(f"design matrix is rank deficient (collinear columns {bad})")


def build_design(table, spec=None):
    """Assemble ``[1, h, h², z...]`` and verify full column rank."""
    h = table.education
    X = np.column_stack([np.ones(table.n), h, h * h, table.controls])
    check_rank(X)
    names = ("const", "educ", "educ_sq", *table.control_names)
    if spec is not None and spec.control_columns:
        names = ("const", "educ", "educ_sq", *spec.control_columns)
    return DesignMatrix(table.wage_log, X, names)


def shift_education(design, eps):
    """Translate schooling by ``eps`` and rebuild the squared column."""
    X = design.X.copy()
    h = X[:, EDUCATION_COL] + eps
    X[:, EDUCATION_COL] = h
    X[:, EDUCATION_SQ_COL] = h * h
    return DesignMatrix(design.w, X, design.names)
