"""Coefficient estimation: score equation, Jacobian, and the alternating fit.

Each cause is fit independently by alternating the baseline recursion at the
current coefficients with damped quasi-Newton updates of the coefficients,
until both the coefficient change and the profiled score are below tolerance.
The fixed-baseline analytic Jacobian seeds the updates; secant corrections
track the extra curvature the baseline re-solve induces, which keeps the
outer iteration superlinear instead of linearly contracting.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .baseline import BaselineCurve, _link_code, _solve_step_generic
from .errors import (
    AggregateFitError,
    ConstantCovariateError,
    CrcureError,
    CurveMismatchError,
    EmptyRiskSetError,
    NoBracketError,
    NonConvergenceError,
    SingularJacobianError,
)
from .links import LinkSpec
from .model import risk_index

MAX_HALVINGS = 30
FD_STEP_SCALE = 1e-6
POLISH_DELTA = 1e-13
MAX_POLISH = 8


@dataclass
class FitConfig:
    """Convergence protocol for the alternating algorithm."""

    beta_init: np.ndarray | None = None
    outer_tol: float = 1e-6
    score_tol: float = 1e-6
    max_outer: int = 100
    max_newton: int = 50
    jacobian: str = "analytic"  # or "fd"

    def __post_init__(self):
        if self.outer_tol <= 0 or self.score_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_outer < 1 or self.max_newton < 1:
            raise ValueError("iteration caps must be at least 1")
        if self.jacobian not in ("analytic", "fd"):
            raise ValueError("jacobian must be 'analytic' or 'fd'")


@dataclass
class CauseFit:
    """Fitted coefficients and baseline for one cause, with diagnostics."""

    cause: int
    beta: np.ndarray
    baseline: BaselineCurve
    score_norm: float
    outer_iters: int
    converged: bool


class _FitContext:
    """Cause-specific arrays cached once per fit, in time-sorted order."""

    def __init__(self, cause, link, idx, ds):
        self.cause = cause
        self.link = link
        self.code = _link_code(link)
        self.table = idx.for_cause(cause)
        self.Z_sorted = np.ascontiguousarray(ds.covariates[idx.order])
        self.risk_start = self.table.risk_start
        self.counts = np.ascontiguousarray(self.table.counts.astype(np.float64))
        m = self.table.times.shape[0]
        ev_zsum = np.empty((m, ds.covariate_dim))
        for j, rows in enumerate(self.table.event_rows):
            ev_zsum[j] = ds.covariates[rows].sum(axis=0)
        self.ev_zsum = np.ascontiguousarray(ev_zsum)

    def eta(self, beta):
        return self.Z_sorted @ beta

    def solve_baseline(self, beta):
        if self.code is not None and _kernels.HAVE_NUMBA:
            h, status, bad = _kernels.baseline_kernel(
                self.code,
                np.ascontiguousarray(self.eta(beta)),
                self.risk_start,
                self.counts,
                _kernels.RESIDUAL_TOL,
                _kernels.MAX_STEP_ITER,
            )
            if status == _kernels.STATUS_OK:
                return BaselineCurve(cause=self.cause, times=self.table.times, h_values=h)
            t_bad = float(self.table.times[bad])
            if status == _kernels.STATUS_EMPTY_RISK:
                raise EmptyRiskSetError(time=t_bad)
            raise _kernels_no_bracket(status, t_bad)
        return _solve_baseline_generic(self, beta)

    def score(self, beta, h, want_jac):
        eta = np.ascontiguousarray(self.eta(beta))
        if self.code is not None and _kernels.HAVE_NUMBA:
            return _kernels.score_kernel(
                self.code, eta, self.Z_sorted, self.risk_start, self.ev_zsum, h, want_jac
            )
        return _score_generic(self.link, eta, self.Z_sorted, self.table, self.ev_zsum, h, want_jac)


def _kernels_no_bracket(status, t_bad):
    if status == _kernels.STATUS_NO_BRACKET:
        return NoBracketError(time=t_bad)
    return NonConvergenceError(_kernels.MAX_STEP_ITER, float("nan"), f"baseline step at time {t_bad}")


def _solve_baseline_generic(ctx, beta):
    eta = ctx.eta(beta)
    table = ctx.table
    m = table.times.shape[0]
    h = np.empty(m)
    h_prev = None
    for j in range(m):
        rs = int(table.risk_start[j])
        suffix = eta[rs:]
        if suffix.size == 0:
            raise EmptyRiskSetError(time=float(table.times[j]))
        c_prev = 0.0 if j == 0 else float(np.sum(ctx.link.cum_hazard(h_prev + suffix)))
        lower = None if j == 0 else h_prev
        try:
            h[j] = _solve_step_generic(ctx.link, suffix, c_prev + float(table.counts[j]), lower)
        except NoBracketError:
            raise NoBracketError(time=float(table.times[j])) from None
        h_prev = h[j]
    return BaselineCurve(cause=ctx.cause, times=table.times, h_values=h)


def _score_generic(link, eta, Z_sorted, table, ev_zsum, h, want_jac):
    n, p = Z_sorted.shape
    U = np.zeros(p)
    J = np.zeros((p, p))
    lamcum = np.zeros(n)
    hazcum = np.zeros(n)
    for j in range(table.times.shape[0]):
        rs = int(table.risk_start[j])
        args = h[j] + eta[rs:]
        cum = np.asarray(link.cum_hazard(args), dtype=float)
        dL = cum - lamcum[rs:]
        lamcum[rs:] = cum
        U -= Z_sorted[rs:].T @ dL
        U += ev_zsum[j]
        if want_jac:
            hz = np.asarray(link.hazard(args), dtype=float)
            dl = hz - hazcum[rs:]
            hazcum[rs:] = hz
            J -= (Z_sorted[rs:] * dl[:, None]).T @ Z_sorted[rs:]
    return U, J


def _check_curve(curve, idx):
    table = idx.for_cause(curve.cause)
    if curve.times.shape != table.times.shape or not np.array_equal(curve.times, table.times):
        raise CurveMismatchError()
    return table


def _context_for_curve(curve, link, idx, ds):
    _check_curve(curve, idx)
    return _FitContext(curve.cause, link, idx, ds)


def score_beta(beta, curve, link, idx, ds):
    """Coefficient estimating function at (beta, curve); zero at the fit."""
    ctx = _context_for_curve(curve, link, idx, ds)
    U, _ = ctx.score(np.asarray(beta, dtype=float), curve.h_values, False)
    return U


def score_jacobian(beta, curve, link, idx, ds, mode="analytic"):
    """Derivative of the score in beta with the baseline curve held fixed.

    'fd' uses central differences of the score with per-coordinate step
    FD_STEP_SCALE * max(1, |beta_c|).
    """
    beta = np.asarray(beta, dtype=float)
    ctx = _context_for_curve(curve, link, idx, ds)
    if mode == "analytic":
        _, J = ctx.score(beta, curve.h_values, True)
        return J
    if mode != "fd":
        raise ValueError("mode must be 'analytic' or 'fd'")
    p = beta.shape[0]
    J = np.empty((p, p))
    for c in range(p):
        e = FD_STEP_SCALE * max(1.0, abs(beta[c]))
        bp = beta.copy()
        bm = beta.copy()
        bp[c] += e
        bm[c] -= e
        J[:, c] = (ctx.score(bp, curve.h_values, False)[0] - ctx.score(bm, curve.h_values, False)[0]) / (2 * e)
    return J


def _fixed_curve_jacobian(ctx, beta, h, config):
    if config.jacobian == "analytic":
        return ctx.score(beta, h, True)[1]
    p = beta.shape[0]
    J = np.empty((p, p))
    for c in range(p):
        e = FD_STEP_SCALE * max(1.0, abs(beta[c]))
        bp = beta.copy()
        bm = beta.copy()
        bp[c] += e
        bm[c] -= e
        J[:, c] = (ctx.score(bp, h, False)[0] - ctx.score(bm, h, False)[0]) / (2 * e)
    return J


def _profile_at(ctx, beta):
    curve = ctx.solve_baseline(beta)
    U, _ = ctx.score(beta, curve.h_values, False)
    return curve, U


def _fit_cause(cause, ds, link, config, idx):
    p = ds.covariate_dim
    spans = np.ptp(ds.covariates, axis=0)
    if np.any(spans == 0.0):
        raise ConstantCovariateError(int(np.flatnonzero(spans == 0.0)[0]))
    if config.beta_init is None:
        beta = np.zeros(p)
    else:
        beta = np.asarray(config.beta_init, dtype=float).copy()
        if beta.shape != (p,):
            raise ValueError(f"beta_init must have length {p}")

    ctx = _FitContext(cause, link, idx, ds)
    curve, U = _profile_at(ctx, beta)
    unorm = float(np.linalg.norm(U))
    J = None
    fresh_jacobian = False
    converged = False
    polish = 0
    outer = 0
    while outer < config.max_outer:
        outer += 1
        if not np.all(np.isfinite(U)):
            raise NonConvergenceError(outer, float("nan"), "score became non-finite")
        if J is None:
            J = _fixed_curve_jacobian(ctx, beta, curve.h_values, config)
            fresh_jacobian = True
        accepted = False
        for _attempt in range(config.max_newton):
            cond = np.linalg.cond(J)
            if not np.isfinite(cond) or cond > 1e14:
                raise SingularJacobianError(cond)
            step = np.linalg.solve(J, -U)
            alpha = 1.0
            for _ in range(MAX_HALVINGS):
                cand = beta + alpha * step
                try:
                    cand_curve, Uc = _profile_at(ctx, cand)
                except CrcureError:
                    alpha *= 0.5  # candidate left the solvable region
                    continue
                nc = float(np.linalg.norm(Uc))
                ok = np.isfinite(nc) and nc < unorm
                if ok and converged:
                    # Polish steps must not move back above the declared tolerance.
                    ok = float(np.max(np.abs(Uc))) <= config.score_tol
                if ok:
                    accepted = True
                    break
                alpha *= 0.5
            if accepted or fresh_jacobian:
                break
            # Stalled on a secant-updated slope: reseed and retry once.
            J = _fixed_curve_jacobian(ctx, beta, curve.h_values, config)
            fresh_jacobian = True
        if not accepted:
            break
        s = cand - beta
        y = Uc - U
        denom = float(s @ s)
        if denom > 0.0:
            J = J + np.outer(y - J @ s, s) / denom
            fresh_jacobian = False
        delta = float(np.max(np.abs(s)))
        beta, curve, U, unorm = cand, cand_curve, Uc, float(np.linalg.norm(Uc))
        if not np.all(np.isfinite(beta)):
            raise NonConvergenceError(outer, float("nan"), "coefficients became non-finite")
        score_norm = float(np.max(np.abs(U)))
        if delta <= config.outer_tol and score_norm <= config.score_tol:
            converged = True
            # Polish to the numerical floor so the fit does not depend on
            # the iteration path (record order, scaling) beyond roundoff.
            polish += 1
            if delta <= POLISH_DELTA * max(1.0, float(np.max(np.abs(beta)))) or polish >= MAX_POLISH:
                break
    return CauseFit(
        cause=cause,
        beta=beta,
        baseline=curve,
        score_norm=float(np.max(np.abs(U))),
        outer_iters=outer,
        converged=converged,
    )


def fit_cause(cause, ds, link, config=None):
    """Fit one cause by the alternating algorithm.

    Returns a CauseFit either way; ``converged`` is False when the protocol's
    iteration caps were reached first. Hard numerical failures (singular
    Jacobian, non-finite iterates, unsolvable baseline steps) raise.
    """
    config = config or FitConfig()
    return _fit_cause(cause, ds, link, config, risk_index(ds))


def fit_all(ds, links, config=None):
    """Fit every cause independently; sibling causes survive a failing one.

    ``links`` is a single LinkSpec applied to all causes or one per cause.
    Raises AggregateFitError (carrying the successful fits) if any cause
    raised; plain non-convergence is reported through the fit flags instead.
    """
    config = config or FitConfig()
    if isinstance(links, LinkSpec):
        links = [links] * ds.num_causes
    links = list(links)
    if len(links) != ds.num_causes:
        raise ValueError(f"expected {ds.num_causes} links, got {len(links)}")
    idx = risk_index(ds)
    fits = {}
    errors = {}
    for k in range(1, ds.num_causes + 1):
        try:
            fits[k] = _fit_cause(k, ds, links[k - 1], config, idx)
        except (CrcureError, np.linalg.LinAlgError) as e:  # keep fitting siblings
            errors[k] = e
    if errors:
        raise AggregateFitError(errors, fits)
    return [fits[k] for k in range(1, ds.num_causes + 1)]
