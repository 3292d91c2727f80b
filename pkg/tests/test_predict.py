import math
import warnings

import numpy as np
import pytest

from crcure import (
    ClampWarning,
    DimensionMismatchError,
    UnsortedGridError,
    cif,
    cif_curve,
    cure_fraction,
    fit_all,
    link_bundle,
    overall_survival,
    population_cure_fraction,
)
from crcure.baseline import BaselineCurve
from crcure.fitting import CauseFit

from _support import random_dataset

PH = link_bundle("ph")
PO = link_bundle("po")


def _manual_fit(cause, times, h_values, beta):
    return CauseFit(
        cause=cause,
        beta=np.asarray(beta, dtype=float),
        baseline=BaselineCurve(cause=cause, times=np.asarray(times), h_values=np.asarray(h_values)),
        score_norm=0.0,
        outer_iters=1,
        converged=True,
    )


def test_cif_closed_forms():
    fit = _manual_fit(1, [1.0, 2.0], [-0.5, 0.1], [0.5])
    # at t=1, z=1: h + z'beta = 0
    assert cif(fit, PH, [1.0], 1.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
    assert cif(fit, PO, [1.0], 1.0) == pytest.approx(0.5, abs=1e-15)


def test_cif_zero_before_first_event():
    fit = _manual_fit(1, [1.0], [0.3], [0.0])
    assert cif(fit, PH, [0.0], 0.5) == 0.0
    assert cif(fit, PH, [0.0], 0.0) == 0.0


def test_cif_dimension_mismatch():
    fit = _manual_fit(1, [1.0], [0.0], [0.5])
    with pytest.raises(DimensionMismatchError):
        cif(fit, PH, [1.0, 2.0], 1.0)


def test_cif_curve_stepwise_nondecreasing(rng):
    ds = random_dataset(rng, n=60, num_causes=2)
    fits = fit_all(ds, PH)
    grid = np.sort(np.unique(np.concatenate([f.baseline.times for f in fits])))
    for fit in fits:
        curve = cif_curve(fit, PH, [1.0], grid)
        assert curve.shape == (grid.size, 2)
        assert np.all(np.diff(curve[:, 1]) >= -1e-15)
        assert np.all((curve[:, 1] >= 0.0) & (curve[:, 1] < 1.0))


def test_cif_curve_empty_and_unsorted_grid():
    fit = _manual_fit(1, [1.0], [0.0], [0.0])
    assert cif_curve(fit, PH, [0.0], []).shape == (0, 2)
    assert cif_curve(fit, PH, [0.0], [2.0]).shape == (1, 2)
    with pytest.raises(UnsortedGridError):
        cif_curve(fit, PH, [0.0], [2.0, 1.0])


def test_survival_one_at_time_zero_and_limits():
    fit1 = _manual_fit(1, [1.0, 2.0], [-1.0, -0.4], [0.3])
    fit2 = _manual_fit(2, [1.5, 2.5], [-1.2, -0.9], [-0.2])
    z = [0.5]
    assert overall_survival([fit1, fit2], [PH, PO], z, 0.0) == 1.0
    tail = overall_survival([fit1, fit2], [PH, PO], z, 99.0)
    assert tail == pytest.approx(cure_fraction([fit1, fit2], [PH, PO], z), abs=0.0)


def test_single_cause_ph_survival_closed_form():
    # h(inf) + z'beta = 0 gives S(inf) = exp(-1)
    fit = _manual_fit(1, [1.0], [-0.8], [0.8])
    assert overall_survival([fit], [PH], [1.0], 5.0) == pytest.approx(math.exp(-1.0), abs=1e-12)


def test_survival_monotone_on_merged_grid(rng):
    ds = random_dataset(rng, n=70, num_causes=2)
    fits = fit_all(ds, PO)
    links = [PO, PO]
    grid = np.sort(np.unique(np.concatenate([f.baseline.times for f in fits])))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        values = [overall_survival(fits, links, [1.0], float(t)) for t in grid]
    if not any(isinstance(w.message, ClampWarning) for w in caught):
        assert all(a >= b - 1e-15 for a, b in zip(values, values[1:]))


def test_clamping_warns_and_clamps():
    heavy1 = _manual_fit(1, [1.0], [3.0], [0.0])
    heavy2 = _manual_fit(2, [1.0], [3.0], [0.0])
    with pytest.warns(ClampWarning):
        value = overall_survival([heavy1, heavy2], [PH, PH], [0.0], 2.0)
    assert value == 0.0
    with pytest.warns(ClampWarning):
        assert cure_fraction([heavy1, heavy2], [PH, PH], [0.0]) == 0.0


def test_cure_fraction_uses_max_h():
    fit = _manual_fit(1, [1.0, 2.0], [-1.0, -0.2], [0.4])
    z = [1.0]
    expected = 1.0 - float(PH.g_inverse(-0.2 + 0.4))
    assert cure_fraction([fit], [PH], z) == pytest.approx(expected, abs=1e-14)


def test_cure_fraction_vanishes_for_divergent_baseline():
    fit = _manual_fit(1, [1.0, 2.0], [0.0, 40.0], [0.0])
    assert cure_fraction([fit], [PH], [0.0]) == pytest.approx(0.0, abs=1e-12)


def test_population_summary_is_row_average(rng):
    ds = random_dataset(rng, n=40, num_causes=2)
    fits = fit_all(ds, PH)
    links = [PH, PH]
    manual = np.mean([cure_fraction(fits, links, ds.covariates[i]) for i in range(ds.n)])
    assert population_cure_fraction(fits, links, ds) == pytest.approx(manual, abs=1e-12)
