"""Command-line entry point: ``topdown-clo {calibrate,map,risk,synth}``.

Exit status is 0 on success, 2 on invalid input and 3 when the solver
fails. Outputs are written only after every result has been computed.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .deal import load_pv_matrix, load_quotes, load_scenarios, pv_matrix_csv
from .entropy import SolverSettings
from .exceptions import SolverError, ValidationError
from .pricing import BespokeSpec, calibrate_index, map_bespoke
from .report import (
    dumps,
    load_index_snapshot,
    misd_block,
    misd_csv,
    scenarios_block,
    write_outputs,
)
from .risk import BumpConfig, RiskReport, loan_price_delta, tranche01
from .synthetic import build_pv_matrix, load_synthetic_spec

EXIT_VALIDATION = 2
EXIT_SOLVER = 3


def _pair(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep or not name:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return name.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None


def _solver_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--residual-tol", type=float, default=1e-8, help="max scaled residual (default 1e-8)")
    g.add_argument("--max-iter", type=int, default=500)
    g.add_argument("--scale", type=float, default=100.0, help="coefficient divisor (default 100)")


def _settings(args) -> SolverSettings:
    return SolverSettings(residual_tol=args.residual_tol, max_iterations=args.max_iter, scale=args.scale)


def _solver_echo(args) -> dict:
    return {"residual_tol": args.residual_tol, "max_iterations": args.max_iter, "scale": args.scale}


def _misd_path(args) -> Path:
    if args.misd_csv:
        return Path(args.misd_csv)
    out = Path(args.out)
    return out.with_name(out.stem + "_misd.csv")


def cmd_calibrate(args) -> dict[Path, str]:
    scenarios = load_scenarios(args.scenarios)
    pv = load_pv_matrix(args.pv, scenarios)
    quotes = load_quotes(args.quotes)
    settings = _settings(args)
    bumps = dict(args.bump or [])
    for label, b in bumps.items():
        name = quotes.resolve(label)
        if quotes.prices[name] + b < 0:
            raise ValidationError(f"bump {label}={b:+g} makes the quote negative")
        quotes = quotes.with_price(name, quotes.prices[name] + b)
    index = calibrate_index(pv, quotes, settings)
    basis = index.basis if quotes.market_loan_price is not None else None
    report = {
        "command": "calibrate",
        "config": {
            "scenarios": str(args.scenarios),
            "pv": str(args.pv),
            "quotes": str(args.quotes),
            "bumps": bumps,
            "solver": _solver_echo(args),
        },
        "scenarios": scenarios_block(scenarios),
        "misd": misd_block(index.misd, scenarios),
        "quotes": quotes.prices,
        "prices": index.prices,
        "implied": index.implied.to_dict(),
        "market_loan_price": quotes.market_loan_price,
        "basis": basis,
        "diagnostics": index.diagnostics.to_dict(),
    }
    return {Path(args.out): dumps(report), _misd_path(args): misd_csv(index.misd, scenarios)}


def cmd_map(args) -> dict[Path, str]:
    index = load_index_snapshot(args.index_report)
    pv = load_pv_matrix(args.pv, index.scenarios)
    bespoke = BespokeSpec(pv, args.loan_price, args.manager_adj, dict(args.pin or []))
    result = map_bespoke(index, bespoke, _settings(args))
    report = {
        "command": "map",
        "config": {
            "index_report": str(args.index_report),
            "pv": str(args.pv),
            "loan_price": args.loan_price,
            "manager_adjustment": args.manager_adj,
            "pins": bespoke.pinned_tranches,
            "solver": _solver_echo(args),
        },
        "index_basis": index.basis_value,
        "loan_target": result.loan_target,
        "misd": misd_block(result.misd, index.scenarios),
        "prices": result.prices,
        "implied": result.implied.to_dict(),
        "divergence_from_index": result.diagnostics.objective,
        "diagnostics": result.diagnostics.to_dict(),
    }
    return {Path(args.out): dumps(report), _misd_path(args): misd_csv(result.misd, index.scenarios)}


def cmd_risk(args) -> dict[Path, str]:
    scenarios = load_scenarios(args.scenarios)
    pv = load_pv_matrix(args.pv, scenarios)
    quotes = load_quotes(args.quotes)
    bpv = load_pv_matrix(args.bespoke_pv, scenarios)
    bespoke = BespokeSpec(bpv, args.loan_price, args.manager_adj, dict(args.pin or []))
    config = BumpConfig(args.bump, args.scheme, args.constraint_mode, args.soft_weight)
    settings = _settings(args)
    index = calibrate_index(pv, quotes, settings)
    base = map_bespoke(index, bespoke, settings, pin_weight=config.pin_weight)
    if args.mode == "delta":
        risk = RiskReport(config, deltas=loan_price_delta(index, bespoke, config, settings))
    else:
        risk = tranche01(pv, quotes, bespoke, config, settings, n_jobs=args.jobs)
        for name, msg in risk.failures.items():
            print(f"tranche01 column {name} unavailable: {msg}", file=sys.stderr)
    report = {
        "command": "risk",
        "config": {
            "mode": args.mode,
            "scenarios": str(args.scenarios),
            "pv": str(args.pv),
            "quotes": str(args.quotes),
            "bespoke_pv": str(args.bespoke_pv),
            "loan_price": args.loan_price,
            "manager_adjustment": args.manager_adj,
            "pins": bespoke.pinned_tranches,
            "solver": _solver_echo(args),
        },
        "index_basis": index.basis if quotes.market_loan_price is not None else None,
        "prices": base.prices,
        "implied": base.implied.to_dict(),
        "risk": risk.to_dict(),
    }
    files = {Path(args.out): dumps(report)}
    if args.mode == "tranche01":
        out = Path(args.out)
        files[Path(args.csv) if args.csv else out.with_name(out.stem + "_tranche01.csv")] = risk.tranche01_csv()
    return files


def cmd_synth(args) -> dict[Path, str]:
    spec = load_synthetic_spec(args.spec)
    scenarios = load_scenarios(args.scenarios)
    pv = build_pv_matrix(spec, scenarios, args.periods)
    return {Path(args.out): pv_matrix_csv(pv)}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topdown-clo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="calibrate the index MISD by maximum entropy")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--pv", required=True)
    p.add_argument("--quotes", required=True)
    p.add_argument("--out", required=True, help="JSON report path")
    p.add_argument("--misd-csv", help="MISD CSV path (default: <out>_misd.csv)")
    p.add_argument("--bump", type=_pair, action="append", metavar="TRANCHE=POINTS",
                   help="shift a quote before calibrating; tranche name or rating")
    _solver_args(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("map", help="map an index MISD onto a bespoke deal")
    p.add_argument("--index-report", required=True)
    p.add_argument("--pv", required=True, help="bespoke PV matrix CSV")
    p.add_argument("--loan-price", type=float, help="bespoke average market loan price")
    p.add_argument("--manager-adj", type=float, default=0.0)
    p.add_argument("--pin", type=_pair, action="append", metavar="TRANCHE=PRICE")
    p.add_argument("--out", required=True)
    p.add_argument("--misd-csv")
    _solver_args(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("risk", help="loan-price deltas or tranche01 by bump-remap-reprice")
    p.add_argument("--mode", choices=("delta", "tranche01"), required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--pv", required=True, help="index PV matrix CSV")
    p.add_argument("--quotes", required=True, help="index quotes CSV")
    p.add_argument("--bespoke-pv", required=True)
    p.add_argument("--loan-price", type=float)
    p.add_argument("--manager-adj", type=float, default=0.0)
    p.add_argument("--pin", type=_pair, action="append", metavar="TRANCHE=PRICE")
    p.add_argument("--bump", type=float, default=1.0)
    p.add_argument("--scheme", choices=("forward", "central"), default="forward")
    p.add_argument("--constraint-mode", choices=("hard", "soft", "co-bump"), default="hard")
    p.add_argument("--soft-weight", type=float, default=30.0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", help="tranche01 matrix CSV path (default: <out>_tranche01.csv)")
    _solver_args(p)
    p.set_defaults(func=cmd_risk)

    p = sub.add_parser("synth", help="PV matrix for a synthetic tranched index")
    p.add_argument("--spec", required=True, help="INI deal spec")
    p.add_argument("--scenarios", required=True)
    p.add_argument("--periods", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        files = args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        if exc.residuals is not None:
            print(f"residuals: {exc.residuals.tolist()}", file=sys.stderr)
        return EXIT_SOLVER
    write_outputs(files)
    return 0


if __name__ == "__main__":
    sys.exit(main())
