"""Baseline solver: recursive one-dimensional root finding for the step function h.

Given coefficients, the nondecreasing baseline is determined at the observed
event times of one cause by a forward recursion: each step solves a monotone
scalar equation matching the risk-weighted cumulative-hazard increment to the
number of failures at that time (tied events grouped).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import (
    ARG_MAX,
    ARG_MIN,
    MAX_STEP_ITER,
    RESIDUAL_TOL,
    STATUS_EMPTY_RISK,
    STATUS_NO_BRACKET,
    STATUS_OK,
)
from .errors import EmptyRiskSetError, NoBracketError, NonConvergenceError
from .links import KIND_PH, KIND_PO


@dataclass(frozen=True, eq=False)
class BaselineCurve:
    """Nondecreasing step function at one cause's event times.

    The curve is -inf before the first event time, right-continuous between
    event times, and constant at its last value beyond the last event time.
    """

    cause: int
    times: np.ndarray
    h_values: np.ndarray

    def __post_init__(self):
        t = np.ascontiguousarray(np.asarray(self.times, dtype=float))
        h = np.ascontiguousarray(np.asarray(self.h_values, dtype=float))
        t.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "h_values", h)

    @property
    def h_infinity(self):
        """Plug-in value for h at infinity: the largest fitted value."""
        return float(self.h_values[-1])

    def evaluate(self, t):
        """Step lookup; -inf before the first event time."""
        if t < self.times[0]:
            return -math.inf
        j = int(np.searchsorted(self.times, t, side="right")) - 1
        return float(self.h_values[j])

    def evaluate_many(self, ts):
        ts = np.asarray(ts, dtype=float)
        j = np.searchsorted(self.times, ts, side="right") - 1
        out = np.where(j >= 0, self.h_values[np.clip(j, 0, None)], -np.inf)
        return out


def evaluate_h(curve, t):
    """Right-continuous step lookup on a fitted baseline curve."""
    return curve.evaluate(t)


def _link_code(link):
    if link.kind == KIND_PH:
        return _kernels.LINK_PH
    if link.kind == KIND_PO:
        return _kernels.LINK_PO
    return None


def _sorted_eta(beta, idx, ds):
    beta = np.asarray(beta, dtype=float)
    return ds.covariates[idx.order] @ beta


def _solve_step_generic(link, eta_suffix, target, lower):
    """Root of sum(Lambda(h + eta)) = target over the current risk suffix.

    Same bracketing and safeguarded-Newton scheme as the accelerated kernel:
    residual tolerance RESIDUAL_TOL, bracket limits ARG_MIN/ARG_MAX on the
    argument scale, at most MAX_STEP_ITER refinement iterations.
    """
    if eta_suffix.size == 0:
        raise EmptyRiskSetError()
    eta_max = float(np.max(eta_suffix))
    hmin = ARG_MIN - eta_max
    hmax = ARG_MAX - eta_max
    floor = (abs(target) + 1.0) * 1e-14

    def g(h):
        return float(np.sum(link.cum_hazard(h + eta_suffix))) - target

    def gp(h):
        return float(np.sum(link.hazard(h + eta_suffix)))

    have_hi = False
    hi = hmax
    ghi = 0.0
    if lower is None:
        lo = min(max(0.0, hmin), hmax)
        glo = g(lo)
        if glo > 0.0:
            hi, ghi, have_hi = lo, glo, True
            w = 1.0
            while glo > 0.0 and lo > hmin:
                lo = max(lo - w, hmin)
                w *= 2.0
                glo = g(lo)
            if glo > 0.0:
                raise NoBracketError()
    else:
        lo = lower
        glo = g(lo)

    if not have_hi:
        slope = gp(lo)
        x = lo + (min(max(-glo / slope, 1e-8), 60.0) if slope > 0.0 else 1.0)
        x = min(x, hmax)
        gx = g(x)
        if gx >= 0.0:
            hi, ghi, have_hi = x, gx, True
        else:
            lo, glo = x, gx
            w = 1.0
            while lo < hmax:
                x = min(lo + w, hmax)
                w *= 2.0
                gx = g(x)
                if gx >= 0.0:
                    hi, ghi, have_hi = x, gx, True
                    break
                lo, glo = x, gx
                if x >= hmax:
                    break
            if not have_hi:
                raise NoBracketError()

    if -glo <= ghi:
        x, gx = lo, glo
    else:
        x, gx = hi, ghi
    for _ in range(MAX_STEP_ITER):
        if abs(gx) <= floor:
            break
        if gx > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= 4.4e-16 * (1.0 + abs(x)):
            break
        slope = gp(x)
        xn = 0.5 * (lo + hi)
        if slope > 0.0:
            cand = x - gx / slope
            if lo < cand < hi:
                xn = cand
        x = xn
        gx = g(x)
    if abs(gx) > RESIDUAL_TOL:
        raise NonConvergenceError(MAX_STEP_ITER, abs(gx), "baseline step equation")
    return x


def solve_first_step(beta, link, idx, ds, cause):
    """Solve the first step equation: risk-weighted Lambda mass equals d_1."""
    table = idx.for_cause(cause)
    eta = _sorted_eta(beta, idx, ds)
    rs = int(table.risk_start[0])
    try:
        return _solve_step_generic(link, eta[rs:], float(table.counts[0]), None)
    except (EmptyRiskSetError, NoBracketError) as e:
        raise type(e)(time=float(table.times[0])) from None


def solve_increment(beta, link, idx, ds, cause, step, h_prev):
    """Solve step ``step`` (0-based, >= 1) given the previous value h_prev."""
    if step < 1:
        raise ValueError("step must be >= 1; use solve_first_step for the first event time")
    if not math.isfinite(h_prev):
        raise ValueError("h_prev must be finite")
    table = idx.for_cause(cause)
    eta = _sorted_eta(beta, idx, ds)
    rs = int(table.risk_start[step])
    suffix = eta[rs:]
    if suffix.size == 0:
        raise EmptyRiskSetError(time=float(table.times[step]))
    c_prev = float(np.sum(link.cum_hazard(h_prev + suffix)))
    try:
        return _solve_step_generic(link, suffix, c_prev + float(table.counts[step]), h_prev)
    except NoBracketError:
        raise NoBracketError(time=float(table.times[step])) from None


def solve_baseline(beta, link, idx, ds, cause):
    """Full forward recursion; returns a nondecreasing BaselineCurve.

    Built-in links run through the compiled kernel; custom links use the
    generic solver. Step failures are re-raised with the failing event time.
    """
    table = idx.for_cause(cause)
    eta = _sorted_eta(beta, idx, ds)
    code = _link_code(link)
    if code is not None and _kernels.HAVE_NUMBA:
        h, status, bad = _kernels.baseline_kernel(
            code,
            np.ascontiguousarray(eta),
            table.risk_start,
            table.counts.astype(np.float64),
            RESIDUAL_TOL,
            MAX_STEP_ITER,
        )
        if status == STATUS_OK:
            return BaselineCurve(cause=cause, times=table.times, h_values=h)
        t_bad = float(table.times[bad])
        if status == STATUS_EMPTY_RISK:
            raise EmptyRiskSetError(time=t_bad)
        if status == STATUS_NO_BRACKET:
            raise NoBracketError(time=t_bad)
        raise NonConvergenceError(MAX_STEP_ITER, math.nan, f"baseline step at time {t_bad}")

    m = table.times.shape[0]
    h = np.empty(m)
    h_prev = None
    for j in range(m):
        rs = int(table.risk_start[j])
        suffix = eta[rs:]
        if suffix.size == 0:
            raise EmptyRiskSetError(time=float(table.times[j]))
        if j == 0:
            c_prev = 0.0  # Lambda at -inf by convention, never evaluated
            lower = None
        else:
            c_prev = float(np.sum(link.cum_hazard(h_prev + suffix)))
            lower = h_prev
        try:
            h[j] = _solve_step_generic(link, suffix, c_prev + float(table.counts[j]), lower)
        except NoBracketError:
            raise NoBracketError(time=float(table.times[j])) from None
        h_prev = h[j]
    return BaselineCurve(cause=cause, times=table.times, h_values=h)
