"""Accelerated numerical kernels for the built-in links.

The baseline recursion and the coefficient score/Jacobian are tight loops
over risk-set suffixes; for the built-in 'ph' and 'po' links they are JIT
compiled. The generic callable-driven implementations in ``baseline`` and
``fitting`` remain the reference path (used for custom links); both paths
implement the same bracketed, safeguarded-Newton step solver.
"""

from __future__ import annotations

import math

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        return wrap


LINK_PH = 0
LINK_PO = 1

# Argument-scale limits keep exp() inside IEEE double range.
ARG_MIN = -745.0
ARG_MAX = 700.0
RESIDUAL_TOL = 1e-10
MAX_STEP_ITER = 200

STATUS_OK = 0
STATUS_EMPTY_RISK = 1
STATUS_NO_BRACKET = 2
STATUS_NO_CONVERGENCE = 3


@njit(cache=True, nogil=True)
def _cum(code, x):
    if code == LINK_PH:
        return math.exp(x)
    if x > 0.0:
        return x + math.log1p(math.exp(-x))
    return math.log1p(math.exp(x))


@njit(cache=True, nogil=True)
def _haz(code, x):
    if code == LINK_PH:
        return math.exp(x)
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def _haz_deriv(code, x):
    if code == LINK_PH:
        return math.exp(x)
    s = _haz(LINK_PO, x)
    return s * (1.0 - s)


@njit(cache=True, nogil=True)
def _sum_cum(code, eta, rs, h):
    total = 0.0
    for i in range(rs, eta.size):
        total += _cum(code, h + eta[i])
    return total


@njit(cache=True, nogil=True)
def _sum_haz(code, eta, rs, h):
    total = 0.0
    for i in range(rs, eta.size):
        total += _haz(code, h + eta[i])
    return total


@njit(cache=True, nogil=True)
def _solve_step_nb(code, eta, rs, target, lower, hmin, hmax, res_tol, max_iter):
    """Root of sum_{i>=rs} Lambda(h + eta_i) = target, increasing in h.

    ``lower`` is a known lower bracket (the previous step's solution) or NaN
    for the first step. Returns (root, status).
    """
    floor = (abs(target) + 1.0) * 1e-14
    have_hi = False
    hi = hmax
    ghi = 0.0

    if math.isnan(lower):
        lo = 0.0
        if lo > hmax:
            lo = hmax
        if lo < hmin:
            lo = hmin
        glo = _sum_cum(code, eta, rs, lo) - target
        if glo > 0.0:
            hi = lo
            ghi = glo
            have_hi = True
            w = 1.0
            while glo > 0.0 and lo > hmin:
                lo -= w
                if lo < hmin:
                    lo = hmin
                w *= 2.0
                glo = _sum_cum(code, eta, rs, lo) - target
            if glo > 0.0:
                return np.nan, STATUS_NO_BRACKET
    else:
        lo = lower
        glo = _sum_cum(code, eta, rs, lo) - target

    if not have_hi:
        gp = _sum_haz(code, eta, rs, lo)
        if gp > 0.0:
            st = -glo / gp
            if st > 60.0:
                st = 60.0
            if st < 1e-8:
                st = 1e-8
            x = lo + st
        else:
            x = lo + 1.0
        if x > hmax:
            x = hmax
        gx = _sum_cum(code, eta, rs, x) - target
        if gx >= 0.0:
            hi = x
            ghi = gx
            have_hi = True
        else:
            lo = x
            glo = gx
            w = 1.0
            while lo < hmax:
                x = lo + w
                if x > hmax:
                    x = hmax
                w *= 2.0
                gx = _sum_cum(code, eta, rs, x) - target
                if gx >= 0.0:
                    hi = x
                    ghi = gx
                    have_hi = True
                    break
                lo = x
                glo = gx
                if x >= hmax:
                    break
            if not have_hi:
                return np.nan, STATUS_NO_BRACKET

    # Safeguarded Newton inside [lo, hi]; bisection whenever the Newton
    # candidate leaves the bracket.
    if -glo <= ghi:
        x = lo
        gx = glo
    else:
        x = hi
        gx = ghi
    it = 0
    while it < max_iter:
        if abs(gx) <= floor:
            break
        if gx > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= 4.4e-16 * (1.0 + abs(x)):
            break
        gpx = _sum_haz(code, eta, rs, x)
        xn = 0.5 * (lo + hi)
        if gpx > 0.0:
            cand = x - gx / gpx
            if lo < cand < hi:
                xn = cand
        x = xn
        gx = _sum_cum(code, eta, rs, x) - target
        it += 1
    if abs(gx) <= res_tol:
        return x, STATUS_OK
    return x, STATUS_NO_CONVERGENCE


@njit(cache=True, nogil=True)
def baseline_kernel(code, eta, risk_start, d, res_tol, max_iter):
    """Forward recursion over the per-step root equations.

    Returns (h, status, failing_step); status 0 means every step solved.
    """
    n = eta.size
    m = risk_start.size
    h = np.full(m, np.nan)
    eta_max = -1.0e300
    for i in range(n):
        if eta[i] > eta_max:
            eta_max = eta[i]
    hmin = ARG_MIN - eta_max
    hmax = ARG_MAX - eta_max
    h_prev = np.nan
    for j in range(m):
        rs = risk_start[j]
        if rs >= n:
            return h, STATUS_EMPTY_RISK, j
        c_prev = 0.0
        if j > 0:
            for i in range(rs, n):
                c_prev += _cum(code, h_prev + eta[i])
        target = c_prev + d[j]
        x, status = _solve_step_nb(code, eta, rs, target, h_prev, hmin, hmax, res_tol, max_iter)
        if status != STATUS_OK:
            return h, status, j
        h[j] = x
        h_prev = x
    return h, STATUS_OK, -1


@njit(cache=True, nogil=True)
def score_kernel(code, eta, Z, risk_start, ev_zsum, h, want_jac):
    """Coefficient score and (optionally) its fixed-baseline Jacobian.

    Uses the convention Lambda(-inf) = 0 for the increment at the first
    event time. Z and eta are in time-sorted order.
    """
    n, p = Z.shape
    m = h.size
    U = np.zeros(p)
    J = np.zeros((p, p))
    lamcum = np.zeros(n)
    hazcum = np.zeros(n)
    for j in range(m):
        rs = risk_start[j]
        hj = h[j]
        for i in range(rs, n):
            a = hj + eta[i]
            c = _cum(code, a)
            dL = c - lamcum[i]
            lamcum[i] = c
            if want_jac:
                hz = _haz(code, a)
                dl = hz - hazcum[i]
                hazcum[i] = hz
                for r in range(p):
                    zir = Z[i, r]
                    U[r] -= zir * dL
                    for s in range(p):
                        J[r, s] -= zir * Z[i, s] * dl
            else:
                for r in range(p):
                    U[r] -= Z[i, r] * dL
        for r in range(p):
            U[r] += ev_zsum[j, r]
    return U, J
