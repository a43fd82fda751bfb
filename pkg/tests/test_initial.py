import math

import numpy as np
import pytest

from collarflow.collar import CollarMetric
from collarflow.grid import build_grid
from collarflow.initial import (
    ENERGY_BUDGET,
    InitialDataError,
    InitialDataSpec,
    build_initial,
    certify_budget,
    select_ell0,
)
from collarflow.symmap import area_w, disjointness_check, energy, leash, v_max
from helpers import default_target


@pytest.fixture(scope="module")
def tgt():
    return default_target("poly")


@pytest.fixture(scope="module")
def built(tgt):
    return build_initial(InitialDataSpec(), tgt, n=1024)


def test_spec_validation():
    with pytest.raises(InitialDataError):
        InitialDataSpec(eps=0.2)
    with pytest.raises(InitialDataError):
        InitialDataSpec(z0=0.9)
    with pytest.raises(InitialDataError):
        InitialDataSpec(energy_slack=-1.0)


def test_lambda_identities():
    spec = InitialDataSpec(eps=1e-3)
    # cap identity: chordal distance from the pole at the cap edge equals eps
    s_edge = spec.lambda1 - 1.0
    chord = math.sqrt(2.0 * (1.0 - math.tanh(s_edge)))
    assert chord == pytest.approx(1e-3, rel=1e-9)
    # annulus modulus: conformal length of D_{1/4} minus D_eps
    assert spec.lambda2 - 1.0 == pytest.approx(math.log(0.25 / 1e-3), rel=1e-12)


def test_ell0_solver_constraints(tgt):
    spec = InitialDataSpec()
    ell0 = select_ell0(spec, tgt)
    X = CollarMetric(ell0).X
    v_star = tgt.warping.v_star()
    ramp = 2.0 * math.pi * v_star**2 / (X - spec.lambda1)
    assert ramp <= 0.95 * spec.energy_slack * (1 + 1e-6)
    # largest feasible: 10 percent shorter collar violates the slack
    X_bad = CollarMetric(ell0 * 1.1).X
    assert 2.0 * math.pi * v_star**2 / (X_bad - spec.lambda1) > 0.95 * spec.energy_slack


def test_budget_certified(built, tgt):
    m, ell0, grid, table = built
    assert table["total"] <= ENERGY_BUDGET
    assert energy(m, grid, tgt) == pytest.approx(table["total"], rel=1e-12)
    # sphere piece at f(v*) = 2: energy 8 pi within 0.5 percent
    assert table["sphere"] == pytest.approx(8.0 * math.pi, rel=5e-3)
    # annulus bounded by 2 max f Area(D_{1/4} minus D_eps)
    assert table["annulus"] <= 2.0 * 8.0 * math.pi * (0.25**2 - 0.9e-6) * 1.01
    assert table["cap_blend"] < 0.1
    assert table["open_blend"] < 0.1


def test_image_outside_unit_ball(built):
    m, _, _, _ = built
    v, r, z = m.full()
    assert np.min(np.hypot(r, z)) >= 1.0 - 1e-12


def test_disjointness_and_area(built, tgt):
    m, _, grid, _ = built
    assert disjointness_check(m, tgt)
    assert area_w(m, grid, tgt) >= 2.0 * math.pi


def test_symmetry_and_boundary(built):
    m, _, _, _ = built
    m.check_invariants()
    assert m.z_half[0] == 0.0
    assert m.r_half[-1] == 0.25
    assert m.z_half[-1] == m.z0


def test_leash_dominates_vmax(built, tgt):
    m, _, grid, _ = built
    assert leash(m, grid, tgt) >= 2.0 * v_max(m)


def test_budget_stability_under_eps_refinement(tgt):
    # halving eps changes the energy by O(eps)
    es = []
    for eps in (2e-3, 1e-3, 5e-4):
        m, ell0, grid, table = build_initial(InitialDataSpec(eps=eps), tgt, n=1024,
                                             ell0=1.3e-3)
        es.append(table["total"])
    assert abs(es[1] - es[2]) <= abs(es[0] - es[1]) + 1e-4
    assert abs(es[0] - es[2]) < 0.05


def test_collar_too_short(tgt):
    with pytest.raises(InitialDataError, match="collar too short"):
        build_initial(InitialDataSpec(), tgt, n=256, ell0=0.8)


def test_overweight_piece_named(tgt):
    # a tiny collar cannot absorb the v-ramp: leash band carries it and fails
    with pytest.raises(InitialDataError, match="energy budget violated"):
        build_initial(InitialDataSpec(energy_slack=2.5), tgt, n=512, ell0=0.05)


def test_product_target_requires_ell0():
    tgt_const = default_target("const")
    with pytest.raises(InitialDataError):
        select_ell0(InitialDataSpec(), tgt_const)
    m, ell0, grid, table = build_initial(InitialDataSpec(), tgt_const, n=512, ell0=0.01)
    assert ell0 == 0.01
    assert np.all(m.v_half == 0.0)
    assert table["total"] < ENERGY_BUDGET
