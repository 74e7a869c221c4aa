"""Command-line interface.

Subcommands: ``fit`` (csv -> model file + report), ``simulate`` (model or
copula -> csv), ``diagnose`` (model + csv -> diagnostic tables), ``bootstrap``
(model -> intervals and bands), ``chi`` (csv or model -> tail-dependence
curves).  Exit codes: 0 success, 1 usage error, 2 data error,
3 non-convergence / fitting failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .angular import chi_coefficient, megpd_simulate
from .copulas import CopulaSpec, compose_with_margins, simulate_copula, true_chi_curve
from .data import DataError, apply_preprocess, load_csv, preprocess
from .egpd import EgpdParams
from .modelfile import ModelFile
from .pipeline import (FitConfig, PipelineError, diagnostics, fit_pipeline,
                       parametric_bootstrap)

__all__ = ["main"]

_EXIT_OK = 0
_EXIT_USAGE = 1
_EXIT_DATA = 2
_EXIT_NONCONVERGENCE = 3


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        sys.exit(_EXIT_USAGE)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="seed for all random number streams")
    p.add_argument("--output-dir", default=".",
                   help="directory for generated files (default: current)")


def _columns_arg(text):
    return [c.strip() for c in text.split(",") if c.strip()] or None


def _parse_p_grid(text: str) -> np.ndarray:
    if ":" in text:
        lo, hi, num = text.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    return np.asarray([float(v) for v in text.split(",")], dtype=float)


def _parse_lambda_grid(text: str) -> np.ndarray:
    if ":" in text:
        lo, hi, num = text.split(":")
        return np.logspace(np.log10(float(lo)), np.log10(float(hi)), int(num))
    return np.asarray([float(v) for v in text.split(",")], dtype=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="megpd",
                     description="Threshold-free multivariate extremes: "
                                 "fit, simulate, diagnose, bootstrap, chi.")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p_fit = sub.add_parser("fit", help="fit the two-step model to a csv file")
    p_fit.add_argument("csv", help="input file (header row, delimited text)")
    p_fit.add_argument("--columns", type=_columns_arg, default=None,
                       help="comma-separated column names (default: all)")
    p_fit.add_argument("--ref-column", default=None,
                       help="denominator coordinate for log-ratios (default: last)")
    p_fit.add_argument("--m", type=int, default=None,
                       help="Bernstein degree (default: sample-size rule)")
    p_fit.add_argument("--K", type=int, default=10,
                       help="spline basis size (default: 10)")
    p_fit.add_argument("--lambda-grid", type=_parse_lambda_grid, default=None,
                       help="smoothing grid, 'lo:hi:num' (log-spaced) or list")
    p_fit.add_argument("--delimiter", default=",")
    p_fit.add_argument("--no-preprocess", action="store_true",
                       help="skip median/min/epsilon preprocessing")
    p_fit.add_argument("--model-name", default="model.json")
    _add_common(p_fit)

    p_sim = sub.add_parser("simulate", help="draw samples from a model or copula")
    p_sim.add_argument("-n", "--size", type=int, required=True)
    src = p_sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="fitted model file")
    src.add_argument("--copula", choices=("symmetric-logistic",
                                          "inverted-logistic", "gaussian"))
    p_sim.add_argument("--alpha", type=float, default=0.2,
                       help="copula dependence parameter (default: 0.2)")
    p_sim.add_argument("--with-margins", action="store_true",
                       help="push copula uniforms through EGPD margins")
    p_sim.add_argument("--margin-kappa", type=float, default=2.0)
    p_sim.add_argument("--margin-xi", type=float, default=0.1)
    p_sim.add_argument("--output", default="samples.csv")
    _add_common(p_sim)

    p_diag = sub.add_parser("diagnose", help="write diagnostic tables")
    p_diag.add_argument("csv")
    p_diag.add_argument("--model", required=True)
    p_diag.add_argument("--columns", type=_columns_arg, default=None)
    p_diag.add_argument("--delimiter", default=",")
    p_diag.add_argument("--nboot", type=int, default=None,
                        help="add bootstrap bands from this many replicates")
    _add_common(p_diag)

    p_boot = sub.add_parser("bootstrap", help="pivotal confidence intervals")
    p_boot.add_argument("--model", required=True)
    p_boot.add_argument("--nboot", type=int, default=1000)
    p_boot.add_argument("--alpha", type=float, default=0.05)
    p_boot.add_argument("--components", choices=("all", "radial"), default="all")
    _add_common(p_boot)

    p_chi = sub.add_parser("chi", help="tail-dependence curves")
    p_chi.add_argument("csv", nargs="?", default=None,
                       help="data file for empirical curves")
    p_chi.add_argument("--model", default=None,
                       help="fitted model for Monte Carlo curves")
    p_chi.add_argument("--copula", choices=("symmetric-logistic",
                                            "inverted-logistic", "gaussian"),
                       default=None, help="exact-copula ground truth curves")
    p_chi.add_argument("--alpha", type=float, default=0.2)
    p_chi.add_argument("--columns", type=_columns_arg, default=None)
    p_chi.add_argument("--delimiter", default=",")
    p_chi.add_argument("--p-grid", type=_parse_p_grid,
                       default=np.linspace(0.80, 0.99, 20))
    p_chi.add_argument("--pair", default="0,1",
                       help="coordinate pair, e.g. '0,1'")
    p_chi.add_argument("--mc-size", type=int, default=10 ** 6)
    p_chi.add_argument("--output", default="chi.csv")
    _add_common(p_chi)
    return parser


def _cmd_fit(args) -> int:
    ds = load_csv(args.csv, columns=args.columns, delimiter=args.delimiter)
    if not args.no_preprocess:
        ds = preprocess(ds)
    cfg = FitConfig(m=args.m, K=args.K, ref_column=args.ref_column,
                    seed=args.seed, lambda_grid=args.lambda_grid)
    model = fit_pipeline(ds, cfg, report=True)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / args.model_name
    model.save(path)
    print(f"model written to {path}")
    if not (model.report["radial_converged"] and model.report["angular_converged"]):
        print("warning: fit did not fully converge", file=sys.stderr)
        return _EXIT_NONCONVERGENCE
    return _EXIT_OK


def _cmd_simulate(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / args.output
    if args.model is not None:
        model = ModelFile.load(args.model)
        samples = megpd_simulate(args.size, model.megpd_model(), seed=args.seed)
        frame = pd.DataFrame(samples, columns=list(model.columns))
    else:
        spec = CopulaSpec(family=args.copula, alpha=args.alpha)
        u = simulate_copula(args.size, spec, seed=args.seed)
        if args.with_margins:
            margins = EgpdParams(kappa=args.margin_kappa, xi=args.margin_xi)
            u = compose_with_margins(u, margins)
        frame = pd.DataFrame(u, columns=["x1", "x2"])
    frame.to_csv(path, index=False)
    print(f"samples written to {path}")
    return _EXIT_OK


def _cmd_diagnose(args) -> int:
    model = ModelFile.load(args.model)
    columns = args.columns
    if columns is None:
        columns = (model.preprocess["columns"] if model.preprocess
                   else list(model.columns))
    ds = load_csv(args.csv, columns=columns, delimiter=args.delimiter)
    if model.preprocess is not None:
        ds = apply_preprocess(ds, model.preprocess)
    boot = None
    if args.nboot:
        boot = parametric_bootstrap(model, nboot=args.nboot, seed=args.seed)
    paths = diagnostics(model, ds, output_dir=args.output_dir, bootstrap=boot,
                        seed=args.seed if args.seed is not None else 0)
    for name, path in sorted(paths.items()):
        print(f"{name}: {path}")
    return _EXIT_OK


def _cmd_bootstrap(args) -> int:
    model = ModelFile.load(args.model)
    result = parametric_bootstrap(model, nboot=args.nboot, seed=args.seed,
                                  alpha=args.alpha, components=args.components)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.table().to_csv(out / "intervals.csv", index=False)
    if result.delta_grid is not None:
        pd.DataFrame({"r": result.delta_grid, "delta": result.delta_hat,
                      "band_lower": result.delta_lo,
                      "band_upper": result.delta_hi}).to_csv(
            out / "delta_band.csv", index=False)
    pd.DataFrame({"p": result.qq_probs, "model": result.qq_model,
                  "band_lower": result.qq_lo, "band_upper": result.qq_hi}
                 ).to_csv(out / "qq_band.csv", index=False)
    for name in ("kappa", "xi", "rho"):
        if name in result.intervals:
            lo, hi = result.intervals[name]
            print(f"{name:<6} {result.estimates[name]:.3f} ({lo:.3f}, {hi:.3f})")
    if result.n_failed:
        print(f"note: {result.n_failed}/{result.nboot} refits failed",
              file=sys.stderr)
    return _EXIT_OK


def _cmd_chi(args) -> int:
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / args.output
    pair = tuple(int(v) for v in args.pair.split(","))
    p = np.asarray(args.p_grid, dtype=float)
    if args.copula is not None:
        spec = CopulaSpec(family=args.copula, alpha=args.alpha)
        table = true_chi_curve(spec, p_grid=p, mc_size=args.mc_size,
                               seed=args.seed)
        frame = pd.DataFrame(table, columns=["p", "chi_upper", "chi_lower", "se"])
    elif args.model is not None:
        model = ModelFile.load(args.model)
        rows = []
        for side in ("upper", "lower"):
            for i, pi in enumerate(p):
                chi, se = chi_coefficient(model.megpd_model(), pi, side=side,
                                          pair=pair, mc_size=args.mc_size,
                                          seed=None if args.seed is None
                                          else args.seed + i)
                rows.append({"p": pi, "side": side, "chi": chi, "se": se})
        frame = pd.DataFrame(rows)
    elif args.csv is not None:
        ds = load_csv(args.csv, columns=args.columns, delimiter=args.delimiter)
        rows = []
        for side in ("upper", "lower"):
            chis = chi_coefficient(ds.values, p, side=side, pair=pair)
            for pi, c in zip(p, np.atleast_1d(chis)):
                rows.append({"p": pi, "side": side, "chi": c})
        frame = pd.DataFrame(rows)
    else:
        raise DataError("chi needs a csv file, --model, or --copula")
    frame.to_csv(path, index=False)
    print(f"chi curves written to {path}")
    return _EXIT_OK


_COMMANDS = {"fit": _cmd_fit, "simulate": _cmd_simulate, "diagnose": _cmd_diagnose,
             "bootstrap": _cmd_bootstrap, "chi": _cmd_chi}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA
    except PipelineError as exc:
        print(f"fitting failed: {exc}", file=sys.stderr)
        return _EXIT_NONCONVERGENCE
    except FileNotFoundError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return _EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
