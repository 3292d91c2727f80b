"""Post-fit quantities: cumulative incidence, overall survival, cure fraction."""

from __future__ import annotations

import math
import warnings

import numpy as np

from .errors import DimensionMismatchError, UnsortedGridError


class ClampWarning(UserWarning):
    """Raw survival fell outside [0, 1] and was clamped."""


def _check_pattern(fit, z):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape[0] != fit.beta.shape[0]:
        raise DimensionMismatchError(fit.beta.shape[0], z.shape[0])
    return z


def cif(fit, link, z, t):
    """Conditional cumulative incidence F(t | z) for this cause.

    Zero before the first event time (the baseline is -inf there), otherwise
    the inverse link of the fitted linear predictor; values lie in [0, 1).
    """
    z = _check_pattern(fit, z)
    h = fit.baseline.evaluate(t)
    if h == -math.inf:
        return 0.0
    return float(link.g_inverse(h + float(z @ fit.beta)))


def cif_curve(fit, link, z, grid):
    """Pointwise CIF over an ascending time grid, as an (len, 2) array of (t, F)."""
    z = _check_pattern(fit, z)
    grid = np.asarray(grid, dtype=float)
    if grid.size and np.any(np.diff(grid) < 0):
        raise UnsortedGridError()
    if grid.size == 0:
        return np.empty((0, 2))
    h = fit.baseline.evaluate_many(grid)
    shift = float(z @ fit.beta)
    values = np.where(np.isneginf(h), 0.0, np.asarray(link.g_inverse(np.where(np.isneginf(h), 0.0, h) + shift)))
    return np.column_stack([grid, values])


def _raw_survival(fits, links, z, t):
    total = 0.0
    for fit, link in zip(fits, links):
        total += cif(fit, link, z, t)
    return 1.0 - total


def _clamp(raw, what):
    if raw < 0.0:
        warnings.warn(ClampWarning(f"{what} sum exceeded 1; clamping to 0"), stacklevel=3)
        return 0.0
    return min(raw, 1.0)


def overall_survival(fits, links, z, t):
    """Overall survival 1 - sum of the per-cause CIFs, clamped into [0, 1].

    The per-cause links are fitted separately, so nothing constrains the raw
    sum of incidences below one; a ClampWarning reports when clamping bites.
    """
    return _clamp(_raw_survival(fits, links, z, t), "cumulative incidence")


def cure_fraction(fits, links, z):
    """Long-run insusceptible probability at covariate pattern z.

    Uses each cause's largest fitted baseline value as its value at
    infinity; identical to overall survival evaluated past the last event
    time, including the clamping policy.
    """
    total = 0.0
    for fit, link in zip(fits, links):
        z_arr = _check_pattern(fit, z)
        total += float(link.g_inverse(fit.baseline.h_infinity + float(z_arr @ fit.beta)))
    return _clamp(1.0 - total, "long-run incidence")


def population_cure_fraction(fits, links, ds):
    """Average cure fraction over the observed covariate rows."""
    raw = np.ones(ds.n)
    for fit, link in zip(fits, links):
        if ds.covariate_dim != fit.beta.shape[0]:
            raise DimensionMismatchError(fit.beta.shape[0], ds.covariate_dim)
        raw -= np.asarray(link.g_inverse(fit.baseline.h_infinity + ds.covariates @ fit.beta))
    clamped = np.clip(raw, 0.0, 1.0)
    n_clamped = int(np.sum(raw < 0.0))
    if n_clamped:
        warnings.warn(
            ClampWarning(f"long-run incidence sum exceeded 1 for {n_clamped} covariate rows; clamped"),
            stacklevel=2,
        )
    return float(clamped.mean())
