"""CSV ingestion, result serialization, and column mapping."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyAfterFilteringError,
    MissingColumnError,
    UnparsableValueError,
)
from .model import SubjectRecord, validate_dataset
from .predict import cure_fraction, population_cure_fraction

logger = logging.getLogger("crcure")

# Tokens treated as a missing covariate value; such rows are dropped.
MISSING_TOKENS = {"", ".", "na", "nan", "n/a", "null"}

MAX_REPORTED_PATTERNS = 32


@dataclass
class ColumnMapping:
    """Names the input columns and how categorical labels map to numbers.

    When ``cause_column`` is None the status column encodes the cause
    directly (0 censored, k = failure from cause k), the convention of the
    canonical HIV/AIDS export.
    """

    time_column: str
    status_column: str
    covariate_columns: tuple
    cause_column: str | None = None
    encodings: dict = field(default_factory=dict)

    def __post_init__(self):
        self.covariate_columns = tuple(self.covariate_columns)

    def all_columns(self):
        cols = [self.time_column, self.status_column]
        if self.cause_column:
            cols.append(self.cause_column)
        cols.extend(self.covariate_columns)
        return cols


AIDSSI_MAPPING = ColumnMapping(
    time_column="time",
    status_column="status",
    covariate_columns=("ccr5",),
    encodings={"ccr5": {"WW": 0.0, "WM": 1.0}},
)


def _parse_float(raw, row, column):
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise UnparsableValueError(row, column, raw) from None


def _parse_int(raw, row, column):
    try:
        return int(float(raw))
    except (TypeError, ValueError):
        raise UnparsableValueError(row, column, raw) from None


def parse_csv_records(path, mapping):
    """Parse rows into SubjectRecord, dropping rows with missing covariates.

    Returns (records, dropped_count). Row numbers in errors are 1-based over
    the data rows (the header is row 0).
    """
    records = []
    dropped = 0
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in mapping.all_columns():
            if col not in header:
                raise MissingColumnError(col)
        for row_num, row in enumerate(reader, start=1):
            covs = []
            missing = False
            for col in mapping.covariate_columns:
                raw = (row[col] or "").strip()
                if raw.lower() in MISSING_TOKENS:
                    missing = True
                    break
                encoding = mapping.encodings.get(col)
                if encoding is not None:
                    if raw not in encoding:
                        raise UnparsableValueError(row_num, col, raw)
                    covs.append(float(encoding[raw]))
                else:
                    covs.append(_parse_float(raw, row_num, col))
            if missing:
                dropped += 1
                continue
            time = _parse_float(row[mapping.time_column], row_num, mapping.time_column)
            status_raw = _parse_int(row[mapping.status_column], row_num, mapping.status_column)
            if mapping.cause_column is None:
                cause = status_raw
                status = 1 if cause > 0 else 0
            else:
                status = status_raw
                cause_raw = (row[mapping.cause_column] or "").strip()
                cause = 0 if cause_raw == "" else _parse_int(cause_raw, row_num, mapping.cause_column)
            records.append(SubjectRecord(time=time, status=status, cause=cause, covariates=covs))
    if not records:
        raise EmptyAfterFilteringError()
    return records, dropped


def load_csv(path, mapping, num_causes):
    """Load and validate a dataset; rows with missing covariates are dropped."""
    records, dropped = parse_csv_records(path, mapping)
    if dropped:
        logger.warning("dropped %d rows with missing covariates from %s", dropped, path)
    return validate_dataset(records, num_causes)


def write_csv(ds, path, covariate_names=None):
    """Write a dataset as CSV with columns time,status,cause,<covariates>.

    Floats are written with full round-trip precision so a reload reproduces
    the dataset (and its fits) exactly.
    """
    names = list(covariate_names or [f"z{i + 1}" for i in range(ds.covariate_dim)])
    if len(names) != ds.covariate_dim:
        raise ValueError("covariate_names length must match the covariate dimension")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time", "status", "cause", *names])
        for i in range(ds.n):
            writer.writerow(
                [repr(float(ds.times[i])), int(ds.status[i]), int(ds.cause[i])]
                + [repr(float(v)) for v in ds.covariates[i]]
            )
    return ColumnMapping(
        time_column="time",
        status_column="status",
        cause_column="cause",
        covariate_columns=tuple(names),
    )


def two_sided_normal_p(beta, se):
    """Two-sided normal p-value from a coefficient and its standard error."""
    if not (se > 0) or not math.isfinite(beta):
        return float("nan")
    return math.erfc(abs(beta / se) / math.sqrt(2.0))


def _pattern_summaries(fits, links, ds):
    patterns, counts = np.unique(ds.covariates, axis=0, return_counts=True)
    if patterns.shape[0] > MAX_REPORTED_PATTERNS:
        return []
    out = []
    for row, count in zip(patterns, counts):
        out.append(
            {
                "covariates": [float(v) for v in row],
                "value": cure_fraction(fits, links, row),
                "count": int(count),
            }
        )
    return out


def fit_result_document(ds, fits, links, variances, dropped_rows=0, extra_se=None):
    """Assemble the JSON-serializable fit document.

    ``variances`` maps cause -> VarianceEstimate or None (for non-converged
    causes); ``extra_se`` optionally maps cause -> a second VarianceEstimate
    reported alongside the headline one.
    """
    causes = []
    for fit, link in zip(fits, links):
        var = variances.get(fit.cause)
        p = fit.beta.shape[0]
        if var is None:
            se = [float("nan")] * p
            method = None
        else:
            se = [float(v) for v in var.standard_errors]
            method = var.method
        beta = [float(b) for b in fit.beta]
        entry = {
            "cause": fit.cause,
            "link": link.name.lower(),
            "beta": beta,
            "se": se,
            "p_value": [two_sided_normal_p(b, s) for b, s in zip(beta, se)],
            "baseline": {
                "times": [float(t) for t in fit.baseline.times],
                "h_values": [float(h) for h in fit.baseline.h_values],
            },
            "diagnostics": {
                "converged": bool(fit.converged),
                "outer_iterations": int(fit.outer_iters),
                "score_norm": float(fit.score_norm),
                "variance_method": method,
            },
        }
        if extra_se and fit.cause in extra_se:
            other = extra_se[fit.cause]
            entry["diagnostics"][f"se_{other.method}"] = [float(v) for v in other.standard_errors]
            if other.method == "bootstrap":
                entry["diagnostics"]["bootstrap_failed_replicates"] = other.failed_reps
        causes.append(entry)
    return {
        "num_causes": ds.num_causes,
        "causes": causes,
        "cure_fraction": {
            "population": population_cure_fraction(fits, links, ds),
            "patterns": _pattern_summaries(fits, links, ds),
        },
        "diagnostics": {
            "n": ds.n,
            "dropped_rows": int(dropped_rows),
            "all_converged": all(f.converged for f in fits),
        },
    }
