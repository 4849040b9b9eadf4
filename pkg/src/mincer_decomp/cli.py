"""Command-line interface.

Exit codes: 0 success, 1 usage or data error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .decomposition import CONVENTIONS, decompose
from .errors import DataError, NumericalError
from .estimators import QuantileGrid, fit_ols, fit_quantile, quantile_objective, qr_oracle_smalln
from .model_frame import CovariateSpec, DesignMatrix, build_design, load_table, write_table
from .pipeline import estimate_design
from .validation import (case_spec, derivative_oracle, generate_synthetic, gini,
                         rif_variance_effect, simulate_location_shift, variance_of_logs)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2
SCALE = 100.0
SCALE_NOTE = "raw values; the text report multiplies every statistic by 100"
ORACLE_ROWS = 12
ORACLE_TAUS = tuple(np.round(np.arange(0.1, 0.91, 0.1), 2))


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _data_args(p):
    p.add_argument("--data", required=True, help="CSV file with one row per worker")
    p.add_argument("--wage", required=True, help="wage column")
    p.add_argument("--education", required=True, help="years-of-schooling column")
    p.add_argument("--controls", default="", help="comma-separated control columns")
    p.add_argument("--wage-levels", action="store_true",
                   help="wage column holds levels; logs are taken after dropping values <= 0")


def _output_args(p):
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="write the report here instead of stdout")


def build_parser():
    parser = _Parser(prog="mincer-decomp",
                     description="Between/within decomposition of the effect of "
                                 "schooling on wage inequality.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("decompose", help="full pipeline and five-block report")
    _data_args(p)
    p.add_argument("--grid", default="0.005:0.995:0.005", help="quantile grid lo:hi:step")
    p.add_argument("--epsilon", type=float, default=0.01, help="shift for the simulation baseline")
    p.add_argument("--bootstrap", type=int, default=200, help="replications (0 disables)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mode", choices=("pairs", "wild"), default="pairs")
    p.add_argument("--convention", choices=CONVENTIONS, default="population")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    _output_args(p)

    for name, text in (("simulate", "OLS location-shift simulation"),
                       ("rif", "RIF regression of the variance")):
        p = sub.add_parser(name, help=text)
        _data_args(p)
        if name == "simulate":
            p.add_argument("--epsilon", type=float, default=0.01)
        _output_args(p)

    p = sub.add_parser("table", help="OLS and quantile coefficients on schooling")
    _data_args(p)
    p.add_argument("--bootstrap", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=None)
    _output_args(p)

    p = sub.add_parser("synth", help="write a synthetic CSV")
    p.add_argument("--case", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--n", type=int, default=50_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("oracle", help="finite-difference and exact-QR self checks")
    _data_args(p)
    p.add_argument("--grid", default="0.1:0.9:0.1")
    _output_args(p)
    return parser


def _spec(args):
    controls = tuple(c.strip() for c in args.controls.split(",") if c.strip())
    return CovariateSpec(args.wage, args.education, controls, not args.wage_levels)


def _emit(text, args):
    if getattr(args, "out", None) and args.command != "synth":
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _fmt(x, digits=2):
    return "n/a" if x is None or not np.isfinite(x) else f"{x:.{digits}f}"


def _t(value, se):
    return value / se if se is not None and se > 0 else None


# --------------------------------------------------------------- decompose

def decompose_report(table, spec, args):
    """Everything ``decompose`` prints, as one JSON-ready dictionary."""
    if not args.epsilon > 0:
        raise UsageError("--epsilon must be positive")
    if args.bootstrap < 0:
        raise UsageError("--bootstrap must be >= 0")
    grid = QuantileGrid.parse(args.grid)
    design = build_design(table, spec)
    point = estimate_design(design, grid, args.convention, args.workers)
    dec = point.decomposition
    report = {
        "gini": gini(np.exp(table.wage_log)),
        "var_logs": variance_of_logs(table.wage_log),
        "simulation": simulate_location_shift(design, point.mean_fit, args.epsilon),
        "rif": rif_variance_effect(design),
        "inequality_level": dec.inequality_level,
        "between": dec.ef_between,
        "within": dec.ef_within,
        "total": dec.total,
        "shares": {"between": dec.share_between, "within": dec.share_within},
        "scale": SCALE_NOTE,
        "config": {
            "data": args.data, "wage": spec.wage_column, "education": spec.education_column,
            "controls": list(spec.control_columns), "wage_is_log": spec.wage_is_log,
            "grid": args.grid, "M": grid.M, "epsilon": args.epsilon,
            "bootstrap": args.bootstrap, "seed": args.seed, "mode": args.mode,
            "convention": args.convention, "n": table.n, "dropped_rows": table.dropped_rows,
        },
    }
    if args.bootstrap > 0:
        # imported here so that --bootstrap 0 never touches the inference code
        from .inference import BootstrapConfig, bootstrap_decomposition, significance_stars

        cfg = BootstrapConfig(args.bootstrap, args.seed, args.mode, grid, args.convention)
        try:
            boot = bootstrap_decomposition(table, spec, cfg, args.workers, point=point)
        except DataError:
            # print what we have before failing (B = 1)
            sys.stderr.write(render_text(report))
            raise
        se = {"simulation": boot.se_simulation, "rif": boot.se_rif,
              "between": boot.se_between, "within": boot.se_within, "total": boot.se_total}
        report["se"] = se
        report["stars"] = {k: (significance_stars(report[k], s) if s > 0 else "")
                           for k, s in se.items()}
    return report


def render_text(r):
    """Five-block report; every statistic is multiplied by 100."""
    se, stars = r.get("se"), r.get("stars", {})
    lines = []

    def row(label, key, digits=2):
        lines.append(f"  {label:<28}{_fmt(SCALE * r[key], digits):>10}{stars.get(key, ''):<3}")
        if se is not None:
            t = _t(r[key], se[key])
            lines.append(f"  {'':<28}{'(' + _fmt(t) + ')':>10}")

    lines.append("Inequality (x100)")
    lines.append(f"  {'Gini index':<28}{_fmt(SCALE * r['gini'], 1):>10}")
    lines.append(f"  {'Variance of logarithms':<28}{_fmt(SCALE * r['var_logs'], 1):>10}")
    lines.append("")
    lines.append("Simulation (x100)")
    row("Marginal effect", "simulation")
    lines.append("")
    lines.append("RIF regression (x100)")
    row("Marginal effect", "rif")
    lines.append("")
    lines.append("Decomposition, levels (x100)")
    row("Between", "between")
    row("Within", "within")
    row("Total", "total")
    lines.append("")
    lines.append("Decomposition, percentage")
    shares = r["shares"]
    for label, key in (("Between", "between"), ("Within", "within")):
        val = shares[key]
        lines.append(f"  {label:<28}{'n/a' if val is None else f'{100 * val:.1f}%':>10}")
    total = "n/a" if shares["between"] is None else "100%"
    lines.append(f"  {'Total':<28}{total:>10}")
    if se is not None:
        lines.append("")
        lines.append("t statistics in parentheses; * 10%, ** 5%, *** 1%")
    return "\n".join(line.rstrip() for line in lines) + "\n"


def _cmd_decompose(args):
    spec = _spec(args)
    table = load_table(args.data, spec)
    report = decompose_report(table, spec, args)
    text = json.dumps(report, indent=2) + "\n" if args.format == "json" else render_text(report)
    _emit(text, args)


# ------------------------------------------------------------- baselines

def _cmd_baseline(args):
    spec = _spec(args)
    design = build_design(load_table(args.data, spec), spec)
    if args.command == "simulate":
        if not args.epsilon > 0:
            raise UsageError("--epsilon must be positive")
        value = simulate_location_shift(design, fit_ols(design), args.epsilon)
        payload = {"simulation": value, "epsilon": args.epsilon, "scale": SCALE_NOTE}
    else:
        value = rif_variance_effect(design)
        payload = {"rif": value, "scale": SCALE_NOTE}
    if args.format == "json":
        _emit(json.dumps(payload, indent=2) + "\n", args)
    else:
        _emit(f"{args.command} marginal effect (x100): {SCALE * value:.2f}\n", args)


# ----------------------------------------------------------------- table

def _cmd_table(args):
    from .inference import TABLE_TAUS, bootstrap_coefficients

    if args.bootstrap < 0:
        raise UsageError("--bootstrap must be >= 0")
    spec = _spec(args)
    table = load_table(args.data, spec)
    coef, se = bootstrap_coefficients(table, spec, TABLE_TAUS, args.bootstrap,
                                      args.seed, args.workers)
    heads = ["OLS"] + [f"q{int(round(100 * t))}" for t in TABLE_TAUS]
    rows = {"educ": 1, "educ_sq": 2}
    if args.format == "json":
        payload = {"columns": heads,
                   "coef": {k: coef[i].tolist() for k, i in rows.items()},
                   "se": None if se is None else {k: se[i].tolist() for k, i in rows.items()},
                   "bootstrap": args.bootstrap, "seed": args.seed}
        _emit(json.dumps(payload, indent=2) + "\n", args)
        return
    lines = [f"{'':<10}" + "".join(f"{h:>11}" for h in heads)]
    for name, i in rows.items():
        lines.append(f"{name:<10}" + "".join(f"{v:>11.5f}" for v in coef[i]))
        if se is not None:
            ts = [_fmt(_t(v, s)) for v, s in zip(coef[i], se[i])]
            lines.append(f"{'':<10}" + "".join(f"{'(' + t + ')':>11}" for t in ts))
    if se is not None:
        lines.append("t statistics (pairs bootstrap) in parentheses")
    _emit("\n".join(lines) + "\n", args)


# ----------------------------------------------------------- synth/oracle

def _cmd_synth(args):
    if args.n < 1:
        raise UsageError("--n must be positive")
    table = generate_synthetic(case_spec(args.case, args.n, args.seed))
    write_table(table, args.out, CovariateSpec("w", "h"))
    sys.stdout.write(f"wrote {table.n} rows to {args.out} (columns w, h; w in logs)\n")


def oracle_checks(design, grid):
    """Run the self checks; returns a list of (name, passed, detail)."""
    out = []
    point = estimate_design(design, grid, workers=1)
    beta, omega = point.mean_fit.beta, point.omega
    total = decompose(beta, omega, point.moments).total
    fd = derivative_oracle(design, beta, omega, 1e-4)
    rel = abs(total - fd) / max(abs(fd), 1e-12)
    out.append(("finite-difference derivative", rel <= 1e-5,
                f"analytic {total:.10g} vs numeric {fd:.10g} (rel {rel:.2e})"))

    k = min(design.n, ORACLE_ROWS)
    small = DesignMatrix(design.w[:k], design.X[:k, :3])
    worst = -np.inf
    try:
        for tau in ORACLE_TAUS:
            exact = quantile_objective(small, qr_oracle_smalln(small, tau), tau)
            got = quantile_objective(small, fit_quantile(small, tau), tau)
            worst = max(worst, got - exact)
        out.append((f"quantile solver vs enumeration (first {k} rows)", worst <= 1e-8,
                    f"largest objective excess {worst:.2e}"))
    except NumericalError as exc:
        out.append((f"quantile solver vs enumeration (first {k} rows)", True,
                    f"skipped: {exc}"))
    return out


def _cmd_oracle(args):
    spec = _spec(args)
    design = build_design(load_table(args.data, spec), spec)
    checks = oracle_checks(design, QuantileGrid.parse(args.grid))
    if args.format == "json":
        text = json.dumps([{"check": n, "pass": bool(ok), "detail": d} for n, ok, d in checks],
                          indent=2) + "\n"
    else:
        text = "".join(f"{'PASS' if ok else 'FAIL'}  {n}: {d}\n" for n, ok, d in checks)
    _emit(text, args)
    if not all(ok for _, ok, _ in checks):
        raise NumericalError("oracle check failed")


COMMANDS = {"decompose": _cmd_decompose, "simulate": _cmd_baseline, "rif": _cmd_baseline,
            "table": _cmd_table, "synth": _cmd_synth, "oracle": _cmd_oracle}


def _origin(exc):
    """Name of the innermost package module the exception passed through."""
    name = "cli"
    tb = exc.__traceback__
    while tb is not None:
        mod = tb.tb_frame.f_globals.get("__name__", "")
        if mod.startswith(__package__ + "."):
            name = mod.rsplit(".", 1)[1].lstrip("_")
        tb = tb.tb_next
    return name


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        sys.stderr.write(f"error [{_origin(exc)}]: {exc}\n")
        return EXIT_USAGE
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"numerical failure [{_origin(exc)}]: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
