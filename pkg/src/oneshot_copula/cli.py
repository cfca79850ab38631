"""Command-line front end.

Exit codes: 0 success, 1 data or runtime failure (including any fit that did
not converge), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import secrets
import sys
from dataclasses import replace

from . import __version__
from .copulas import (
    FRANK_APPROX_ALPHA_RANGE,
    FRANK_APPROX_TAU_RANGE,
    GH,
    CopulaFamily,
    DomainError,
    alpha_from_tau,
    frank_tau_approx,
    tau_from_alpha,
)
from .data import OneShotDataset
from .datasets import BUILTIN_DATASETS, DataFormatError, NamedDataset, load_csv
from .inference import WEIGHTINGS, FitConfig, FitResult, IdentificationError, fit_betas
from .simulation import BUILTIN_SCENARIOS, PARAMETERS, MCSummary, builtin_scenario, load_scenario, monte_carlo

DEFAULT_BETAS = (0.0, 0.2, 0.4, 0.6)
TOOL = "oneshot-copula"


class CLIError(Exception):
    """Data or runtime problem; reported on stderr with exit code 1."""


def _float_list(text: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise argparse.ArgumentTypeError(f"expected comma-separated finite numbers, got {text!r}")
    return values


def _beta_list(text: str) -> list[float]:
    values = _float_list(text)
    if any(v < 0 for v in values):
        raise argparse.ArgumentTypeError("beta values must be >= 0")
    return sorted(set(values))


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer seed, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must lie in [0, 2**64)")
    return value


def _clean(obj):
    """JSON-safe copy: NaN/inf become null, dict keys become strings."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def _dumps(doc) -> str:
    # float repr is the shortest string that round-trips (at most 17 digits)
    return json.dumps(_clean(doc), indent=2, sort_keys=False) + "\n"


def _num(x: float) -> str:
    return repr(float(x)) if math.isfinite(x) else ""


def _fmt3(x: float) -> str:
    return f"{x:.3f}" if math.isfinite(x) else "NA"


def _stress_key(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def _emit(text: str, output: str | None) -> None:
    if output:
        with open(output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(rows: list[list]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _table(header: list[str], rows: list[list[str]]) -> str:
    cells = [header] + rows
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- fit

def _load_source(args) -> NamedDataset:
    if args.builtin:
        return BUILTIN_DATASETS[args.builtin]()
    try:
        named = load_csv(args.data)
    except FileNotFoundError:
        raise CLIError(f"{args.data}: file not found") from None
    except OSError as exc:
        raise CLIError(f"{args.data}: {exc.strerror or exc}") from None
    except DataFormatError as exc:
        raise CLIError(f"{args.data}: {exc}") from None
    for w in named.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return named


def fit_report(named: NamedDataset, family: CopulaFamily, results: list[FitResult],
               config: FitConfig, betas) -> dict:
    ds: OneShotDataset = named.dataset
    return {
        "tool": TOOL,
        "version": __version__,
        "dataset": named.name,
        "n_cells": len(ds),
        "total_units": ds.total_units,
        "stress_levels": list(ds.stress_levels),
        "stress_labels": {_stress_key(k): v for k, v in named.stress_labels.items()},
        "family": family.value,
        "config": {
            "betas": list(betas),
            "eval_stress": list(config.eval_stresses),
            "weighting": config.weighting,
            "floor_eps": config.floor_eps,
            "xatol": config.xatol,
            "fatol": config.fatol,
            "max_iter": config.max_iter,
            "start": None if config.start is None else {"a0": config.start.a0, "a1": config.start.a1},
        },
        "rows": [r.to_dict() for r in results],
    }


def _fit_csv(results: list[FitResult]) -> str:
    stresses = list(results[0].alpha_by_stress)
    header = (["beta", "a0", "a1"] + [f"alpha(x={_stress_key(x)})" for x in stresses]
              + [f"tau(x={_stress_key(x)})" for x in stresses]
              + ["abias_percent", "abias_weighted_percent", "objective", "converged", "iterations"])
    rows = [header]
    for r in results:
        rows.append([_num(r.beta), _num(r.theta_hat.a0), _num(r.theta_hat.a1)]
                    + [_num(r.alpha_by_stress[x]) for x in stresses]
                    + [_num(r.tau_by_stress[x]) for x in stresses]
                    + [_num(r.abias_percent), _num(r.abias_weighted_percent), _num(r.objective_value),
                       str(r.converged).lower(), str(r.iterations)])
    return _csv_text(rows)


def _fit_table(named: NamedDataset, family: CopulaFamily, results: list[FitResult]) -> str:
    stresses = list(results[0].alpha_by_stress)
    header = ["parameter"] + [("QMLE" if r.beta == 0 else f"{r.beta:g}") for r in results]
    rows = [["a0"] + [_fmt3(r.theta_hat.a0) for r in results],
            ["a1"] + [_fmt3(r.theta_hat.a1) for r in results]]
    rows += [[f"alpha(x={_stress_key(x)})"] + [_fmt3(r.alpha_by_stress[x]) for r in results] for x in stresses]
    rows += [[f"tau(x={_stress_key(x)})"] + [_fmt3(r.tau_by_stress[x]) for r in results] for x in stresses]
    rows.append(["ABias"] + [_fmt3(r.abias_percent) for r in results])
    rows.append(["converged"] + [("yes" if r.converged else "NO") for r in results])
    title = f"# {named.name}, {family.value} copula\n"
    return title + _table(header, rows)


def cmd_fit(args) -> int:
    named = _load_source(args)
    family = CopulaFamily.parse(args.copula)
    config = FitConfig(weighting=args.weighting, eval_stresses=tuple(args.eval_stress or ()),
                       max_iter=args.max_iter)
    try:
        results = fit_betas(named.dataset, family, args.beta, config)
    except (IdentificationError, DomainError, ValueError) as exc:
        raise CLIError(str(exc)) from None
    if args.format == "json":
        text = _dumps(fit_report(named, family, results, config, args.beta))
    elif args.format == "csv":
        text = _fit_csv(results)
    else:
        text = _fit_table(named, family, results)
    _emit(text, args.output)
    failed = [r.beta for r in results if not r.converged]
    if failed:
        print(f"error: fit did not converge for beta = {', '.join(f'{b:g}' for b in failed)}", file=sys.stderr)
        return 1
    return 0


# ----------------------------------------------------------- simulate

def simulate_report(summary: MCSummary) -> dict:
    return {"tool": TOOL, "version": __version__, **summary.to_dict()}


def _sim_csv(summary: MCSummary) -> str:
    truth = summary.scenario.true_values()
    rows = [["beta", "parameter", "true_value", "mean", "converged", "failures"]]
    for b in summary.betas:
        for p in PARAMETERS:
            rows.append([_num(b), p, _num(truth[p]), _num(summary.means[b][p]),
                         str(summary.converged[b]), str(summary.failures[b])])
    return _csv_text(rows)


def _sim_table(summary: MCSummary) -> str:
    sc = summary.scenario
    truth = sc.true_values()
    header = ["parameter", "true"] + [("QMLE" if b == 0 else f"{b:g}") for b in summary.betas]
    rows = [[p, _fmt3(truth[p])] + [_fmt3(summary.means[b][p]) for b in summary.betas] for p in PARAMETERS]
    rows.append(["failures", ""] + [str(summary.failures[b]) for b in summary.betas])
    title = (f"# {sc.name}, K*={sc.k_star}, {'contaminated' if sc.contaminate else 'non-contaminated'}, "
             f"{summary.replications} replications, seed {summary.seed}\n")
    return title + _table(header, rows)


def cmd_simulate(args) -> int:
    if args.scenario in BUILTIN_SCENARIOS:
        sc = builtin_scenario(args.scenario, k_star=args.kstar or 100, contaminate=args.contaminate)
    else:
        try:
            sc = load_scenario(args.scenario)
        except FileNotFoundError:
            raise CLIError(f"{args.scenario}: not a builtin scenario and no such file "
                           f"(builtins: {', '.join(BUILTIN_SCENARIOS)})") from None
        except (OSError, ValueError) as exc:
            raise CLIError(f"{args.scenario}: {exc}") from None
        if args.kstar:
            sc = replace(sc, k_star=args.kstar)
        if args.contaminate:
            sc = replace(sc, contaminate=True)
    seed = args.seed if args.seed is not None else secrets.randbits(63)
    summary = monte_carlo(sc, args.beta, args.reps, seed, workers=args.workers)
    if args.format == "json":
        text = _dumps(simulate_report(summary))
    elif args.format == "csv":
        text = _sim_csv(summary)
    else:
        text = _sim_table(summary)
    _emit(text, args.output)
    return 0


# ---------------------------------------------------------------- tau

def cmd_tau(args) -> int:
    family = CopulaFamily.parse(args.copula)
    rows = []
    try:
        if args.alpha is not None:
            for a in args.alpha:
                row = {"alpha": a, "tau": float(tau_from_alpha(family, a))}
                if family is not GH:
                    row["tau_approx"] = float(frank_tau_approx(a))
                    lo, hi = FRANK_APPROX_ALPHA_RANGE
                    row["approx_valid"] = lo <= a <= hi
                rows.append(row)
        else:
            for t in args.tau:
                row = {"tau": t, "alpha": float(alpha_from_tau(family, t))}
                if family is not GH:
                    row["alpha_approx"] = 9.0 * t
                    lo, hi = FRANK_APPROX_TAU_RANGE
                    row["approx_valid"] = lo <= t <= hi
                rows.append(row)
    except DomainError as exc:
        raise CLIError(str(exc)) from None
    if args.format == "json":
        _emit(_dumps({"tool": TOOL, "version": __version__, "family": family.value, "rows": rows}), None)
        return 0
    keys = list(rows[0])
    body = [[(("yes" if r[k] else "no") if isinstance(r[k], bool) else f"{r[k]:.4f}") for k in keys] for r in rows]
    _emit(_table(keys, body), None)
    return 0


# --------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=TOOL, description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a copula regression for one or more beta values")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", metavar="CSV", help="dataset file (inspection_time,stress,n0,n1,n2,n12)")
    src.add_argument("--builtin", choices=sorted(BUILTIN_DATASETS))
    p.add_argument("--copula", required=True, choices=["gh", "frank"])
    p.add_argument("--beta", type=_beta_list, default=list(DEFAULT_BETAS),
                   help="comma-separated tuning parameters (default 0,0.2,0.4,0.6)")
    p.add_argument("--eval-stress", type=_float_list, default=None,
                   help="extra stresses at which to report alpha and tau")
    p.add_argument("--weighting", choices=WEIGHTINGS, default="mixed",
                   help="condition weights in the objective (default mixed)")
    p.add_argument("--max-iter", type=_positive_int, default=2000)
    p.add_argument("--format", choices=["json", "csv", "table"], default="json")
    p.add_argument("--output", "-o", help="write the report here instead of stdout")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="Monte Carlo study of the estimators")
    p.add_argument("--scenario", required=True,
                   help=f"builtin name ({', '.join(BUILTIN_SCENARIOS)}) or a JSON scenario file")
    p.add_argument("--kstar", type=_positive_int, default=None, help="units per condition (builtin default 100)")
    p.add_argument("--reps", type=_positive_int, default=1000)
    p.add_argument("--seed", type=_seed, default=None, help="master seed (random and echoed if omitted)")
    p.add_argument("--beta", type=_beta_list, default=list(DEFAULT_BETAS))
    p.add_argument("--contaminate", action="store_true")
    p.add_argument("--workers", type=_positive_int, default=None,
                   help="worker processes (default $ONESHOT_COPULA_THREADS or 1)")
    p.add_argument("--format", choices=["json", "csv", "table"], default="json")
    p.add_argument("--output", "-o")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tau", help="convert between copula alpha and Kendall's tau")
    p.add_argument("--copula", required=True, choices=["gh", "frank"])
    grp = p.add_mutually_exclusive_group(required=True)
    grp.add_argument("--alpha", type=_float_list)
    grp.add_argument("--tau", type=_float_list)
    p.add_argument("--format", choices=["table", "json"], default="table")
    p.set_defaults(func=cmd_tau)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
