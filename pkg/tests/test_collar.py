import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import brentq

from collarflow.collar import (
    TWO_ARSINH_1,
    CollarDomainError,
    CollarMetric,
    collar_bound_report,
    collar_width,
    thin_part_width,
    width_sandwich_constants,
)


def test_width_cylinder_example():
    # arctan(1) = pi/4
    assert collar_width(1.0, "cylinder", d=1.0) == pytest.approx(math.pi**2 / 2.0, rel=1e-12)


def test_width_closed_example():
    ell = TWO_ARSINH_1
    with pytest.raises(CollarDomainError):
        collar_width(ell, "closed")
    ell = TWO_ARSINH_1 * (1.0 - 1e-12)
    want = 2.0 * math.pi / ell * (math.pi / 4.0)
    assert collar_width(ell, "closed") == pytest.approx(want, rel=1e-6)
    assert collar_width(ell, "closed") == pytest.approx(2.79948, rel=1e-4)


@pytest.mark.parametrize("variant", ["closed", "cylinder"])
def test_width_small_ell_limit(variant):
    for ell in [1e-3, 1e-5, 1e-7]:
        assert ell * collar_width(ell, variant) == pytest.approx(math.pi**2, rel=1e-2 * ell**0)
    assert 1e-7 * collar_width(1e-7, variant) == pytest.approx(math.pi**2, rel=1e-6)


def test_width_monotone_decreasing():
    for variant, hi in (("closed", TWO_ARSINH_1 * 0.99), ("cylinder", 3.0)):
        ells = np.linspace(1e-4, hi, 200)
        xs = [collar_width(float(e), variant) for e in ells]
        assert np.all(np.diff(xs) < 0)


def test_width_errors():
    with pytest.raises(CollarDomainError):
        collar_width(0.0)
    with pytest.raises(CollarDomainError):
        collar_width(-1.0, "closed")
    with pytest.raises(CollarDomainError):
        collar_width(1.0, "cylinder", d=0.0)
    with pytest.raises(CollarDomainError):
        collar_width(1.0, "nope")


def test_rho_center_and_parity():
    met = CollarMetric(0.3)
    assert float(met.rho(0.0)) == pytest.approx(0.3 / (2 * math.pi), rel=1e-14)
    s = np.linspace(0, met.X, 50)
    assert np.allclose(met.rho(s), met.rho(-s), rtol=1e-14)
    # strictly increasing in |s|
    assert np.all(np.diff(met.rho(s)) > 0)


def test_rho_at_closed_edge_limit():
    # rho(X) = (ell/2pi) cosh(ell/2)/sinh(ell/2) -> 1/pi as ell -> 0
    for ell, rtol in [(0.5, 3e-2), (1e-2, 1e-5), (1e-4, 1e-9)]:
        met = CollarMetric(ell, "closed")
        want = ell / (2 * math.pi) * math.cosh(ell / 2) / math.sinh(ell / 2)
        assert float(met.rho(met.X)) == pytest.approx(want, rel=1e-10)
        assert want == pytest.approx(1.0 / math.pi, rel=rtol)


def test_rho_domain_error():
    met = CollarMetric(0.3)
    with pytest.raises(CollarDomainError):
        met.rho(met.X * 1.01)


@settings(max_examples=60, deadline=None)
@given(ell=st.floats(1e-3, 1.0), u0=st.floats(-0.95, 0.95), du=st.floats(-1.0, 1.0))
def test_rho_comparability_nearby_points(ell, u0, du):
    # e^{-1} rho(s0) <= rho(s) <= e rho(s0) whenever |s - s0| <= e^{-1} rho(s0)^{-1}
    met = CollarMetric(ell)
    s0 = u0 * met.X
    step = du * math.exp(-1.0) / float(met.rho(s0))
    s = min(max(s0 + step, -met.X), met.X)
    ratio = float(met.rho(s) / met.rho(s0))
    assert math.exp(-1.0) - 1e-9 <= ratio <= math.exp(1.0) + 1e-9


@settings(max_examples=40, deadline=None)
@given(ell=st.floats(1e-3, 1.0), u1=st.floats(-1, 1), u2=st.floats(-1, 1))
def test_rho_global_comparability(ell, u1, u2):
    # rho(s) <= e^{C3 |s - s'|} rho(s') with C3 = max rho = rho(X)
    met = CollarMetric(ell)
    s1, s2 = u1 * met.X, u2 * met.X
    c3 = float(met.rho(met.X))
    lhs = math.log(float(met.rho(s1)))
    rhs = c3 * abs(s1 - s2) + math.log(float(met.rho(s2)))
    assert lhs <= rhs + 1e-12


def test_dlog_rho_bound_and_fd():
    met = CollarMetric(0.2)
    s = np.linspace(-met.X * 0.999, met.X * 0.999, 300)
    an = met.dlog_rho_ds(s)
    fd = np.gradient(np.log(met.rho(s)), s)
    assert np.allclose(an[3:-3], fd[3:-3], rtol=1e-3, atol=1e-6)
    assert np.all(np.abs(an) <= met.rho(s) * (1 + 1e-12))


def test_injectivity_examples():
    met = CollarMetric(0.3)
    assert float(met.injectivity_radius(0.0)) == pytest.approx(0.15, rel=1e-14)
    s = np.linspace(0, met.X, 100)
    inj = met.injectivity_radius(s)
    assert np.all(inj >= 0.15 - 1e-15)
    assert np.all(np.diff(inj) > 0)


def test_thin_width_trivial_and_errors():
    # eps = ell/2: arcsin(1) = pi/2 so X_eps = 0
    assert thin_part_width(0.2, 0.1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(CollarDomainError):
        thin_part_width(0.2, 0.09)
    with pytest.raises(CollarDomainError):
        thin_part_width(-1.0, 0.5)


def test_thin_width_bisection_oracle():
    # invert inj(s) = eps independently and compare
    ell, eps = 0.1, 0.2
    met = CollarMetric(ell)
    want = brentq(lambda s: float(met.injectivity_radius(s)) - eps, 0.0, met.X, xtol=1e-12)
    got = thin_part_width(ell, eps)
    assert got == pytest.approx(want, abs=1e-8)


def test_thin_width_roundtrip():
    for ell in [0.02, 0.1, 0.3]:
        met = CollarMetric(ell)
        for eps in np.linspace(ell * 0.7, 2.0, 9):
            xe = thin_part_width(ell, float(eps))
            if xe == 0.0 or xe >= met.X:
                continue
            assert float(met.injectivity_radius(xe)) == pytest.approx(eps, abs=1e-10)


def test_thin_width_sandwich():
    # c / eps <= X - X_eps <= C / eps over a grid, positive fitted constants
    vals = []
    for ell in [0.01, 0.05, 0.1]:
        met = CollarMetric(ell)
        inj_boundary = float(met.injectivity_radius(met.X))
        for eps in [0.15, 0.3, 0.6, 1.0]:
            if eps >= 0.95 * inj_boundary:
                continue  # formula valid below the boundary injectivity radius
            gap = collar_width(ell) - thin_part_width(ell, eps)
            vals.append(gap * eps)
    assert len(vals) >= 6
    assert min(vals) > 0.1
    assert max(vals) / min(vals) < 50.0


def test_collar_bound_report():
    for ell in [0.5, 0.1, 0.02, TWO_ARSINH_1 * 0.98]:
        rep = collar_bound_report(CollarMetric(ell))
        assert rep["int_rho_sqrt_ok"]
        assert rep["area_bound_ok"]
        assert rep["int_rho_sqrt_margin"] > 0
    # s = 0 bound reads 0 <= 2 pi rho(0) = ell
    met = CollarMetric(0.4)
    assert 2 * math.pi * float(met.rho(0.0)) == pytest.approx(0.4, rel=1e-14)


def test_width_sandwich_constants():
    for variant in ("closed", "cylinder"):
        c1, c2 = width_sandwich_constants(variant)
        assert 0 < c1 <= c2 < 10.0


@settings(max_examples=30, deadline=None)
@given(ell=st.floats(1e-4, 0.8))
def test_grid_stretch_properties(ell):
    from collarflow.grid import StretchSpec, build_grid

    met = CollarMetric(ell)
    g = build_grid(128, met, StretchSpec(gamma0=64.0))
    assert g.s[0] == -met.X and g.s[-1] == met.X
    assert np.all(np.diff(g.s) > 0)
    assert abs(float(g.stretch.ds_dX(1.0, met.X)) - 1.0) < 1e-12
    assert np.all(np.isfinite(g.ds_dX))
