import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from crcure import UnknownLinkError, consistency_deviation, custom_link, link_bundle

# Region where the identity is checkable at 1e-12: beyond x ~ 2 the PH
# survivor 1 - g_inverse(x) loses relative precision in doubles and the log
# side picks up amplified rounding noise.
GRID = np.linspace(-40.0, 2.0, 211)


def test_ph_closed_forms():
    ph = link_bundle("ph")
    assert ph.cum_hazard(0.0) == pytest.approx(1.0, abs=1e-15)
    assert ph.g_inverse(0.0) == pytest.approx(1.0 - math.exp(-1.0), abs=1e-12)
    assert ph.hazard(0.0) == pytest.approx(1.0, abs=1e-15)


def test_po_closed_forms():
    po = link_bundle("po")
    assert po.cum_hazard(0.0) == pytest.approx(math.log(2.0), abs=1e-15)
    assert po.g_inverse(0.0) == pytest.approx(0.5, abs=1e-15)
    assert po.hazard(0.0) == pytest.approx(0.5, abs=1e-15)


def test_cum_hazard_vanishes_at_minus_infinity():
    for name in ("ph", "po"):
        link = link_bundle(name)
        assert link.cum_hazard(-700.0) < 1e-300
        assert link.g_inverse(-700.0) < 1e-300


def test_consistency_identity_on_grid():
    for name in ("ph", "po"):
        assert consistency_deviation(link_bundle(name), GRID) <= 1e-12


@given(st.floats(min_value=-40.0, max_value=2.0))
def test_consistency_identity_pointwise(x):
    for name in ("ph", "po"):
        link = link_bundle(name)
        dev = abs(float(link.cum_hazard(x)) + math.log1p(-float(link.g_inverse(x))))
        assert dev <= 1e-12


@given(st.floats(min_value=-40.0, max_value=6.0), st.floats(min_value=1e-6, max_value=1.0))
def test_cum_hazard_strictly_increasing(x, step):
    for name in ("ph", "po"):
        link = link_bundle(name)
        assert float(link.cum_hazard(x + step)) > float(link.cum_hazard(x))
        assert float(link.hazard(x)) > 0.0


def test_finite_difference_consistency():
    eps = 1e-5
    xs = np.linspace(-8.0, 6.0, 141)
    for name in ("ph", "po"):
        link = link_bundle(name)
        fd_hazard = (link.cum_hazard(xs + eps) - link.cum_hazard(xs - eps)) / (2 * eps)
        assert np.max(np.abs(link.hazard(xs) - fd_hazard)) <= 1e-6
        fd_deriv = (link.hazard(xs + eps) - link.hazard(xs - eps)) / (2 * eps)
        assert np.max(np.abs(link.hazard_deriv(xs) - fd_deriv)) <= 1e-6


def test_unknown_link():
    with pytest.raises(UnknownLinkError):
        link_bundle("weibull")


def test_link_bundle_case_insensitive():
    assert link_bundle("PH").name == "PH"
    assert link_bundle("Po").name == "PO"


def test_custom_link_consistency_check():
    ok = custom_link("ph-copy", lambda x: -np.expm1(-np.exp(x)), np.exp, np.exp, np.exp, check_grid=GRID)
    assert ok.kind == "custom"
    with pytest.raises(ValueError, match="inconsistent"):
        custom_link(
            "broken",
            lambda x: -np.expm1(-np.exp(x)),
            lambda x: np.exp(x) * 1.01,  # wrong cumulative hazard
            np.exp,
            np.exp,
            check_grid=GRID,
        )
