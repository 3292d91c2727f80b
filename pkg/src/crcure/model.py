"""Domain types: subject records, validated datasets, and risk-set indexing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CauseOutOfRangeError,
    EmptyCauseError,
    InconsistentCovariateLengthError,
    NegativeTimeError,
)


def _readonly(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SubjectRecord:
    """One observation: follow-up time, event indicator, cause label, covariates.

    ``status`` is 1 when an event was observed, 0 when censored; ``cause`` is
    the failure cause in 1..K for events and 0 for censored records.
    """

    time: float
    status: int
    cause: int
    covariates: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "status", int(self.status))
        object.__setattr__(self, "cause", int(self.cause))
        z = _readonly(np.atleast_1d(np.asarray(self.covariates, dtype=float)))
        object.__setattr__(self, "covariates", z)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Validated right-censored competing-risks sample, array-backed.

    Construct through :func:`validate_dataset` or :meth:`Dataset.from_arrays`;
    instances are immutable and safe to share across threads.
    """

    times: np.ndarray        # (n,) follow-up times
    status: np.ndarray       # (n,) 0/1 event indicators
    cause: np.ndarray        # (n,) cause labels, 0 for censored
    covariates: np.ndarray   # (n, p)
    num_causes: int

    def __post_init__(self):
        object.__setattr__(self, "times", _readonly(np.asarray(self.times, dtype=float)))
        object.__setattr__(self, "status", _readonly(np.asarray(self.status, dtype=np.int64)))
        object.__setattr__(self, "cause", _readonly(np.asarray(self.cause, dtype=np.int64)))
        object.__setattr__(self, "covariates", _readonly(np.asarray(self.covariates, dtype=float)))

    @property
    def n(self):
        return self.times.shape[0]

    @property
    def covariate_dim(self):
        return self.covariates.shape[1]

    @property
    def records(self):
        """Materialize the row view as a tuple of SubjectRecord."""
        return tuple(
            SubjectRecord(self.times[i], self.status[i], self.cause[i], self.covariates[i])
            for i in range(self.n)
        )

    @classmethod
    def from_arrays(cls, times, status, cause, covariates, num_causes):
        """Validate array inputs and build a Dataset without per-record objects."""
        times = np.asarray(times, dtype=float)
        status = np.asarray(status, dtype=np.int64)
        cause = np.asarray(cause, dtype=np.int64)
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates[:, None]
        _check_arrays(times, status, cause, covariates, int(num_causes))
        return cls(times, status, cause, covariates, int(num_causes))


def _check_arrays(times, status, cause, covariates, num_causes):
    n = times.shape[0]
    if n == 0:
        raise ValueError("dataset is empty")
    if num_causes < 1:
        raise ValueError("num_causes must be at least 1")
    if covariates.shape[0] != n or status.shape[0] != n or cause.shape[0] != n:
        raise ValueError("times, status, cause and covariates must have matching length")
    bad = ~(np.isfinite(times) & (times >= 0.0))
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NegativeTimeError(i, float(times[i]))
    bad = (status != 0) & (status != 1)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise CauseOutOfRangeError(i, f"status {status[i]} is not 0 or 1")
    bad = (cause < 0) | (cause > num_causes)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise CauseOutOfRangeError(i, f"cause {cause[i]} is outside 0..{num_causes}")
    bad = (status == 0) != (cause == 0)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise CauseOutOfRangeError(
            i, f"status {status[i]} and cause {cause[i]} are inconsistent (status 0 iff cause 0)"
        )
    if not np.isfinite(covariates).all():
        i = int(np.flatnonzero(~np.isfinite(covariates).all(axis=1))[0])
        raise ValueError(f"record {i}: covariates contain non-finite values")
    counts = np.bincount(cause, minlength=num_causes + 1)
    for k in range(1, num_causes + 1):
        if counts[k] == 0:
            raise EmptyCauseError(k)


def validate_dataset(records, num_causes):
    """Validate a sequence of SubjectRecord and assemble a Dataset.

    Raises NegativeTimeError, CauseOutOfRangeError,
    InconsistentCovariateLengthError or EmptyCauseError, each naming the
    offending record index (or cause).
    """
    records = list(records)
    if not records:
        raise ValueError("dataset is empty")
    p = np.atleast_1d(np.asarray(records[0].covariates, dtype=float)).shape[0]
    times = np.empty(len(records))
    status = np.empty(len(records), dtype=np.int64)
    cause = np.empty(len(records), dtype=np.int64)
    covariates = np.empty((len(records), p))
    for i, r in enumerate(records):
        z = np.atleast_1d(np.asarray(r.covariates, dtype=float))
        if z.shape[0] != p:
            raise InconsistentCovariateLengthError(i, p, z.shape[0])
        times[i] = r.time
        status[i] = r.status
        cause[i] = r.cause
        covariates[i] = z
    _check_arrays(times, status, cause, covariates, int(num_causes))
    return Dataset(times, status, cause, covariates, int(num_causes))


@dataclass(frozen=True, eq=False)
class CauseEventTable:
    """Sorted distinct event times for one cause, with tie counts and risk-set anchors.

    ``risk_start[j]`` indexes into the time-sorted subject order: the at-risk
    set at event time j is the suffix ``order[risk_start[j]:]`` under the
    convention Y_i(t) = 1(T_i >= t).
    """

    cause: int
    times: np.ndarray        # (m,) distinct event times, ascending
    counts: np.ndarray       # (m,) tie multiplicities d_kj
    risk_start: np.ndarray   # (m,) suffix starts into the sorted order
    event_rows: tuple        # per event time, original row indices of the failures

    @property
    def num_events(self):
        return int(self.counts.sum())


@dataclass(frozen=True, eq=False)
class RiskIndex:
    """Risk-set machinery shared by all causes of one dataset."""

    order: np.ndarray         # (n,) original indices sorted by time (stable)
    sorted_times: np.ndarray  # (n,) times in sorted order
    tables: tuple             # CauseEventTable for causes 1..K

    def for_cause(self, cause):
        if not 1 <= cause <= len(self.tables):
            raise ValueError(f"cause {cause} is outside 1..{len(self.tables)}")
        return self.tables[cause - 1]

    def num_at_risk(self, cause, step):
        table = self.for_cause(cause)
        return self.sorted_times.shape[0] - int(table.risk_start[step])

    def at_risk_suffix(self, t):
        """Start of the at-risk suffix in the sorted order at time t."""
        return int(np.searchsorted(self.sorted_times, t, side="left"))


def at_risk(ds, t):
    """At-risk mask in original row order, Y_i(t) = 1(T_i >= t)."""
    return ds.times >= t


def risk_index(ds):
    """Build the per-cause event tables and the shared sorted order."""
    order = np.argsort(ds.times, kind="stable")
    sorted_times = ds.times[order]
    tables = []
    for k in range(1, ds.num_causes + 1):
        rows = np.flatnonzero(ds.cause == k)
        t_k = ds.times[rows]
        uniq, inverse, counts = np.unique(t_k, return_inverse=True, return_counts=True)
        groups = tuple(_readonly(rows[inverse == j]) for j in range(uniq.shape[0]))
        risk_start = np.searchsorted(sorted_times, uniq, side="left").astype(np.int64)
        tables.append(
            CauseEventTable(
                cause=k,
                times=_readonly(uniq),
                counts=_readonly(counts.astype(np.int64)),
                risk_start=_readonly(risk_start),
                event_rows=groups,
            )
        )
    return RiskIndex(order=_readonly(order), sorted_times=_readonly(sorted_times), tables=tuple(tables))
