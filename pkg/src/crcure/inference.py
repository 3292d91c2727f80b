"""Coefficient covariance estimation: plug-in sandwich and nonparametric bootstrap."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .baseline import _sorted_eta
from .errors import (
    CrcureError,
    NonConvergenceError,
    SingularInformationError,
    TooManyFailedReplicatesError,
    ZeroDenominatorError,
)
from .fitting import FitConfig, _check_curve, _fit_cause, score_jacobian
from .model import Dataset, risk_index

MIN_BOOTSTRAP_REPS = 50
MAX_FAILED_FRACTION = 0.10


@dataclass
class VarianceEstimate:
    """Covariance of the coefficient estimator for one cause."""

    cause: int
    method: str  # 'sandwich' or 'bootstrap'
    covariance: np.ndarray
    standard_errors: np.ndarray
    bootstrap_reps: int | None = None
    failed_reps: int = 0


class _EventQuantities:
    """Per-event-time quantities shared by the plug-in variance formulas."""

    def __init__(self, fit, link, idx, ds):
        self.table = _check_curve(fit.baseline, idx)
        self.eta = _sorted_eta(fit.beta, idx, ds)
        self.Z = ds.covariates[idx.order]
        self.sorted_times = idx.sorted_times
        self.h = fit.baseline.h_values
        self.times = self.table.times
        self.n = ds.n
        m = self.times.shape[0]
        lamsum = np.empty(m)
        hdsum = np.empty(m)
        for j in range(m):
            rs = int(self.table.risk_start[j])
            args = self.h[j] + self.eta[rs:]
            lamsum[j] = float(np.sum(link.hazard(args)))
            hdsum[j] = float(np.sum(link.hazard_deriv(args)))
            if lamsum[j] == 0.0:
                raise ZeroDenominatorError(float(self.times[j]))
        ratio = hdsum / lamsum
        # Growth increments ratio_j * (h_j - h_{j-1}); the first increment
        # starts from h = -inf and is unbounded, tracked separately.
        incr = np.zeros(m)
        if m > 1:
            incr[1:] = ratio[1:] * np.diff(self.h)
        self.prefix = np.cumsum(incr)  # prefix[j] = sum of finite increments up to j

    def growth_exponent(self, js, je):
        """Sum of increments over event indices [js, je); +inf if it includes index 0."""
        if je <= js:
            return 0.0
        if js == 0:
            return math.inf
        return float(self.prefix[je - 1] - self.prefix[js - 1])


def baseline_growth_factor(fit, link, idx, ds, t, s):
    """Accumulated growth factor of the baseline between two times.

    Defined as exp of the ratio-weighted baseline increments over event times
    in (s, t]; equals 1 when that interval contains no event times (in
    particular whenever s >= t), and +inf when it contains the first event
    time, where the increment from -inf is unbounded.
    """
    q = _EventQuantities(fit, link, idx, ds)
    js = int(np.searchsorted(q.times, s, side="right"))
    je = int(np.searchsorted(q.times, t, side="right"))
    return float(np.exp(q.growth_exponent(js, je)))


def _mu_at(q, link, j):
    """Plug-in mu at event index j: risk- and hazard-weighted covariate average.

    Each at-risk subject's covariate is carried with its growth factor over
    the event times between the evaluation time and the subject's own
    follow-up time; that interval is empty for subjects still at risk, so
    their factor is one by the one-sided definition.
    """
    rs = int(q.table.risk_start[j])
    lam = np.asarray(link.hazard(q.h[j] + q.eta[rs:]), dtype=float)
    # Number of event times covered by each subject's own follow-up time.
    s_idx = np.searchsorted(q.times, q.sorted_times[rs:], side="right")
    expo = np.zeros(s_idx.shape[0])
    behind = s_idx < j + 1
    expo[behind & (s_idx == 0)] = np.inf
    sel = behind & (s_idx >= 1)
    if np.any(sel):
        expo[sel] = q.prefix[j] - q.prefix[s_idx[sel] - 1]
    growth = np.exp(expo)
    denom = float(np.sum(lam))
    if denom == 0.0:
        raise ZeroDenominatorError(float(q.times[j]))
    num = (q.Z[rs:] * (lam * growth)[:, None]).sum(axis=0)
    return num / denom


def mu_hat(t, fit, link, idx, ds):
    """Plug-in covariate centering at an observed event time of this cause."""
    q = _EventQuantities(fit, link, idx, ds)
    j = int(np.searchsorted(q.times, t))
    if j >= q.times.shape[0] or q.times[j] != t:
        raise ValueError(f"{t} is not an observed event time for cause {fit.baseline.cause}")
    return _mu_at(q, link, j)


def sandwich_covariance(fit, link, idx, ds, slope="centered"):
    """Plug-in sandwich covariance of the fitted coefficients.

    ``slope`` selects the middle-inverse slope matrix: 'centered' (default)
    discretizes the centered per-event slope starting at the second event
    time (the first baseline increment is unbounded); 'jacobian' uses the
    fixed-baseline score derivative instead.
    """
    if not fit.converged:
        raise NonConvergenceError(fit.outer_iters, fit.score_norm, "variance requires a converged fit")
    if slope not in ("centered", "jacobian"):
        raise ValueError("slope must be 'centered' or 'jacobian'")
    q = _EventQuantities(fit, link, idx, ds)
    n = q.n
    p = q.Z.shape[1]
    m = q.times.shape[0]

    sigma0 = np.zeros((p, p))
    sigma1 = np.zeros((p, p))
    lamcum = np.zeros(q.eta.shape[0])
    for j in range(m):
        rs = int(q.table.risk_start[j])
        args = q.h[j] + q.eta[rs:]
        cum = np.asarray(link.cum_hazard(args), dtype=float)
        dLam = cum - lamcum[rs:]
        lamcum[rs:] = cum
        mu = _mu_at(q, link, j)
        centered = q.Z[rs:] - mu
        sigma0 += (centered * dLam[:, None]).T @ centered
        if slope == "centered" and j >= 1:
            w = np.asarray(link.hazard_deriv(args), dtype=float)
            sigma1 += ((centered * w[:, None]).T @ q.Z[rs:]) * (q.h[j] - q.h[j - 1])
    sigma0 /= n
    if slope == "centered":
        sigma1 /= n
    else:
        sigma1 = -score_jacobian(fit.beta, fit.baseline, link, idx, ds) / n

    cond = np.linalg.cond(sigma1)
    if not np.isfinite(cond) or cond > 1e14:
        raise SingularInformationError(cond)
    try:
        inner = np.linalg.solve(sigma1, sigma0)
        cov = np.linalg.solve(sigma1, inner.T).T / n
    except np.linalg.LinAlgError:
        raise SingularInformationError(float("inf")) from None
    cov = 0.5 * (cov + cov.T)
    return VarianceEstimate(
        cause=fit.cause,
        method="sandwich",
        covariance=cov,
        standard_errors=np.sqrt(np.maximum(np.diag(cov), 0.0)),
    )


def _bootstrap_one(ds, cause, link, config, seed_seq):
    rng = np.random.default_rng(seed_seq)
    rows = rng.integers(0, ds.n, ds.n)
    try:
        sub = Dataset.from_arrays(
            ds.times[rows], ds.status[rows], ds.cause[rows], ds.covariates[rows], ds.num_causes
        )
        fit = _fit_cause(cause, sub, link, config, risk_index(sub))
    except (CrcureError, ValueError, np.linalg.LinAlgError):
        return None
    if not fit.converged:
        return None
    return fit.beta


def bootstrap_covariance(ds, cause, link, config=None, reps=200, seed=None, workers=1):
    """Nonparametric bootstrap covariance: resample whole records, refit.

    Replicates use independent, replicate-indexed random streams derived from
    ``seed``, so the result does not depend on scheduling; replicates that
    fail to converge are dropped and counted.
    """
    if reps < MIN_BOOTSTRAP_REPS:
        raise ValueError(f"bootstrap needs at least {MIN_BOOTSTRAP_REPS} replicates, got {reps}")
    config = config or FitConfig()
    streams = np.random.SeedSequence(seed).spawn(reps)
    results = [None] * reps
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {
                r: pool.submit(_bootstrap_one, ds, cause, link, config, streams[r]) for r in range(reps)
            }
            for r, fut in futures.items():
                results[r] = fut.result()
    else:
        for r in range(reps):
            results[r] = _bootstrap_one(ds, cause, link, config, streams[r])
    betas = [b for b in results if b is not None]
    failed = reps - len(betas)
    if failed > MAX_FAILED_FRACTION * reps:
        raise TooManyFailedReplicatesError(failed, reps)
    arr = np.asarray(betas)
    cov = np.atleast_2d(np.cov(arr, rowvar=False, ddof=1))
    return VarianceEstimate(
        cause=cause,
        method="bootstrap",
        covariance=cov,
        standard_errors=np.sqrt(np.maximum(np.diag(cov), 0.0)),
        bootstrap_reps=reps,
        failed_reps=failed,
    )
