"""Command-line interface: fit, curves, and benchmark subcommands."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import numpy as np

from .baseline import BaselineCurve
from .dataio import (
    MISSING_TOKENS,
    ColumnMapping,
    fit_result_document,
    parse_csv_records,
)
from .errors import (
    CrcureError,
    PatternDimensionMismatchError,
    UnsortedGridError,
)
from .fitting import CauseFit, fit_all
from .inference import bootstrap_covariance, sandwich_covariance
from .links import link_bundle
from .model import risk_index, validate_dataset
from .predict import cif_curve, overall_survival
from .simulate import (
    ScenarioConfig,
    parse_model_name,
    parse_scenario_file,
    run_monte_carlo,
    write_mc_csv,
)

CURVE_CSV_HEADER = ("cause", "z_pattern", "t", "cif")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="crcure",
        description="Fit semiparametric transformation models to competing-risks data with a cure fraction.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit the model to a CSV dataset and write a JSON result")
    fit.add_argument("--input", required=True, help="input CSV path")
    fit.add_argument("--link", default="ph", help="link for every cause: ph or po")
    fit.add_argument("--link-per-cause", default=None, help="comma-separated per-cause links, e.g. ph,po")
    fit.add_argument("--causes", type=int, required=True, help="number of competing causes K")
    fit.add_argument("--time", required=True, help="column with follow-up times")
    fit.add_argument("--status", required=True, help="status column (encodes the cause when --cause-col is absent)")
    fit.add_argument("--cause-col", default=None, help="separate cause column (status is then 0/1)")
    fit.add_argument("--covariates", required=True, help="comma-separated covariate columns")
    fit.add_argument(
        "--encode",
        action="append",
        default=[],
        metavar="COL=LABEL:VALUE,...",
        help="explicit categorical encoding, e.g. ccr5=WW:0,WM:1 (repeatable)",
    )
    fit.add_argument("--se", choices=("sandwich", "bootstrap", "both"), default="sandwich")
    fit.add_argument("--boot-reps", type=int, default=200)
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--out", required=True, help="output JSON path")

    curves = sub.add_parser("curves", help="evaluate CIF and survival curves from a prior fit result")
    curves.add_argument("--fit-result", required=True, help="JSON file produced by 'crcure fit'")
    curves.add_argument(
        "--covariate-pattern",
        action="append",
        required=True,
        metavar="V1,V2,...",
        help="covariate pattern to evaluate (repeatable)",
    )
    curves.add_argument("--grid", required=True, help="time grid: 'start:stop:count' or comma-separated values")
    curves.add_argument("--out", default="-", help="output CSV path (default stdout)")

    bench = sub.add_parser("benchmark", help="run the Monte Carlo bias/MSE study")
    bench.add_argument("--scenario", default=None, help="scenario file with key = value lines")
    bench.add_argument("--model", default=None, help="ph/po (or 0/1)")
    bench.add_argument("--betas", default=None, help="true coefficients, e.g. 1,1")
    bench.add_argument("--n", type=int, default=None)
    bench.add_argument("--censoring", type=float, default=None)
    bench.add_argument("--cure-mass", type=float, default=0.0)
    bench.add_argument("--reps", type=int, default=None)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--label", default=None)
    bench.add_argument("--workers", type=int, default=1)
    bench.add_argument("--out", default="-", help="output CSV path (default stdout)")
    return parser


def _parse_encodings(specs):
    encodings = {}
    for spec in specs:
        if "=" not in spec:
            raise ValueError(f"--encode expects COL=LABEL:VALUE,... got {spec!r}")
        col, body = spec.split("=", 1)
        table = {}
        for pair in body.split(","):
            if ":" not in pair:
                raise ValueError(f"--encode expects LABEL:VALUE pairs, got {pair!r}")
            label, value = pair.split(":", 1)
            table[label.strip()] = float(value)
        encodings[col.strip()] = table
    return encodings


def _auto_encodings(path, covariate_columns, explicit):
    """Detect label columns and build 0/1 encodings for binary ones.

    The WW/WM pair keeps the wild type as the reference level; other binary
    label sets are encoded alphabetically.
    """
    seen = {col: set() for col in covariate_columns if col not in explicit}
    if not seen:
        return dict(explicit)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            for col in seen:
                raw = (row.get(col) or "").strip()
                if raw.lower() in MISSING_TOKENS:
                    continue
                seen[col].add(raw)
    encodings = dict(explicit)
    for col, labels in seen.items():
        numeric = True
        for raw in labels:
            try:
                float(raw)
            except ValueError:
                numeric = False
                break
        if numeric:
            continue
        if labels == {"WW", "WM"}:
            encodings[col] = {"WW": 0.0, "WM": 1.0}
        elif len(labels) == 2:
            lo, hi = sorted(labels)
            encodings[col] = {lo: 0.0, hi: 1.0}
        else:
            raise ValueError(
                f"column {col!r} has {len(labels)} labels; provide an explicit --encode mapping"
            )
    return encodings


def _cmd_fit(args):
    covariate_columns = tuple(c.strip() for c in args.covariates.split(",") if c.strip())
    if args.link_per_cause:
        links = [link_bundle(name) for name in args.link_per_cause.split(",")]
        if len(links) != args.causes:
            raise ValueError(f"--link-per-cause must list {args.causes} links")
    else:
        links = [link_bundle(args.link)] * args.causes
    encodings = _auto_encodings(args.input, covariate_columns, _parse_encodings(args.encode))
    mapping = ColumnMapping(
        time_column=args.time,
        status_column=args.status,
        cause_column=args.cause_col,
        covariate_columns=covariate_columns,
        encodings=encodings,
    )
    records, dropped = parse_csv_records(args.input, mapping)
    if dropped:
        print(f"note: dropped {dropped} rows with missing covariates", file=sys.stderr)
    ds = validate_dataset(records, args.causes)
    fits = fit_all(ds, links)
    idx = risk_index(ds)

    variances = {}
    extra = {}
    for fit, link in zip(fits, links):
        if not fit.converged:
            variances[fit.cause] = None
            continue
        if args.se in ("sandwich", "both"):
            variances[fit.cause] = sandwich_covariance(fit, link, idx, ds)
            if args.se == "both":
                extra[fit.cause] = bootstrap_covariance(
                    ds, fit.cause, link, reps=args.boot_reps, seed=args.seed
                )
        else:
            variances[fit.cause] = bootstrap_covariance(
                ds, fit.cause, link, reps=args.boot_reps, seed=args.seed
            )
    document = fit_result_document(ds, fits, links, variances, dropped_rows=dropped, extra_se=extra)
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(_sanitize(document), fh, indent=2)
        fh.write("\n")
    return 0 if all(f.converged for f in fits) else 2


def _sanitize(obj):
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _parse_grid(spec):
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError("grid spec must be start:stop:count or comma-separated values")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        return np.linspace(start, stop, count)
    grid = np.asarray([float(v) for v in spec.split(",") if v.strip() != ""])
    if grid.size and np.any(np.diff(grid) < 0):
        raise UnsortedGridError()
    return grid


def _cmd_curves(args):
    with open(args.fit_result, "r", encoding="utf-8") as fh:
        document = json.load(fh)
    fits = []
    links = []
    for entry in document["causes"]:
        curve = BaselineCurve(
            cause=entry["cause"],
            times=np.asarray(entry["baseline"]["times"], dtype=float),
            h_values=np.asarray(entry["baseline"]["h_values"], dtype=float),
        )
        diag = entry["diagnostics"]
        fits.append(
            CauseFit(
                cause=entry["cause"],
                beta=np.asarray(entry["beta"], dtype=float),
                baseline=curve,
                score_norm=diag.get("score_norm", float("nan")) or float("nan"),
                outer_iters=diag.get("outer_iterations", 0),
                converged=bool(diag.get("converged", False)),
            )
        )
        links.append(link_bundle(entry["link"]))
    p = fits[0].beta.shape[0]
    patterns = []
    for raw in args.covariate_pattern:
        z = np.asarray([float(v) for v in raw.split(",")])
        if z.shape[0] != p:
            raise PatternDimensionMismatchError(p, z.shape[0])
        patterns.append(z)
    grid = _parse_grid(args.grid)

    rows = []
    for z in patterns:
        label = ";".join(f"{v:g}" for v in z)
        for fit, link in zip(fits, links):
            for t, value in cif_curve(fit, link, z, grid):
                rows.append((fit.cause, label, t, value))
        for t in grid:
            rows.append(("overall", label, float(t), overall_survival(fits, links, z, float(t))))

    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8", newline="")
    try:
        writer = csv.writer(out)
        writer.writerow(CURVE_CSV_HEADER)
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def _cmd_benchmark(args):
    if args.scenario:
        cfg = parse_scenario_file(args.scenario)
        if args.reps is not None or args.seed is not None or args.label is not None:
            cfg = ScenarioConfig(
                model=cfg.model,
                true_betas=cfg.true_betas,
                n=cfg.n,
                censor_target=cfg.censor_target,
                cure_mass=cfg.cure_mass,
                replications=args.reps if args.reps is not None else cfg.replications,
                seed=args.seed if args.seed is not None else cfg.seed,
                label=args.label if args.label is not None else cfg.label,
            )
    else:
        if args.model is None or args.betas is None or args.n is None or args.censoring is None:
            raise ValueError("benchmark needs --scenario or all of --model/--betas/--n/--censoring")
        cfg = ScenarioConfig(
            model=parse_model_name(args.model),
            true_betas=tuple(float(b) for b in args.betas.split(",")),
            n=args.n,
            censor_target=args.censoring,
            cure_mass=args.cure_mass,
            replications=args.reps if args.reps is not None else 1,
            seed=args.seed if args.seed is not None else 0,
            label=args.label,
        )
    summary = run_monte_carlo(cfg, workers=args.workers)
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8", newline="")
    try:
        write_mc_csv([summary], out)
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {"fit": _cmd_fit, "curves": _cmd_curves, "benchmark": _cmd_benchmark}
    try:
        return handlers[args.command](args)
    except (CrcureError, ValueError, OSError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
