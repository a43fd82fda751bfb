"""Initial map construction with a certified energy budget.

The initial map concatenates, in the collar coordinate s >= 0:

  * a conformal unit-sphere piece r = sech s, z = tanh s on s <= L1 - 1
    (caps of chordal radius eps removed at the poles; the cap identity
    tanh(L1 - 1) = 1 - eps^2/2 fixes L1),
  * a polar-angle wind-down to the pole along the unit sphere on
    [L1 - 1, L1] (keeps |w| = 1, speed O(eps)),
  * a straight leash r = 0, z linear from 1 to z0 on [L1, X - L2],
  * a radial opening r: 0 -> eps at z = z0 on [X - L2, X - L2 + 1],
  * a conformal flat annulus r = (1/4) e^{s - X}, z = z0 on [X - L2 + 1, X]
    (the annulus modulus fixes L2 = 1 + log(1/(4 eps))),

mirrored by the symmetry.  The height profile is v = v* (where f(v*) = 2)
over the sphere piece with linear ramps to 0 at the collar ends.  The
initial length ell0 is the largest value whose ramp and leash energies fit
the configured slack, keeping the total at or under the 10 pi budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .collar import CollarMetric, collar_width
from .grid import CollarGrid, StretchSpec, build_grid
from .symmap import SymmetricMap, assemble_fields
from .target import TargetGeometry

ENERGY_BUDGET = 10.0 * math.pi


class InitialDataError(ValueError):
    pass


def _smoothstep(z):
    z = np.clip(z, 0.0, 1.0)
    return z**3 * (10.0 - 15.0 * z + 6.0 * z * z)


@dataclass(frozen=True)
class InitialDataSpec:
    eps: float = 1e-3            # cap/annulus geometry parameter
    z0: float = 1.2
    energy_slack: float = 2.5    # absolute budget for leash + ramp together
    ell_cap: float = math.inf    # optional upper bound on ell0 (e.g. ell_bar)

    def __post_init__(self):
        if not (0.0 < self.eps < 0.125):
            raise InitialDataError("eps must lie in (0, 1/8)")
        if self.z0 <= 1.0:
            raise InitialDataError("z0 must exceed 1")
        if self.energy_slack <= 0.0:
            raise InitialDataError("energy_slack must be positive")

    @property
    def lambda1(self) -> float:
        return 1.0 + math.atanh(1.0 - self.eps**2 / 2.0)

    @property
    def lambda2(self) -> float:
        return 1.0 + math.log(1.0 / (4.0 * self.eps))


def _ramp_leash_energies(spec: InitialDataSpec, v_star: float, X: float) -> tuple[float, float]:
    gap_ramp = X - spec.lambda1
    gap_leash = X - spec.lambda1 - spec.lambda2
    if gap_leash <= 0.0:
        return math.inf, math.inf
    e_ramp = 2.0 * math.pi * v_star**2 / gap_ramp
    # conservative max-f weight on the leash
    e_leash = 8.0 * math.pi * (spec.z0 - 1.0) ** 2 / gap_leash
    return e_ramp, e_leash


def select_ell0(spec: InitialDataSpec, target: TargetGeometry, d: float = 1.0,
                vbar_cap: bool = True) -> float:
    """Largest ell whose ramp and leash energies fit inside the slack.

    The v-ramp dominates (its height is v* with f(v*) = 2, forced to ~40+
    by the slope cap on the warping), so it gets 95 percent of the slack.
    """
    if target.warping.kind == "const":
        raise InitialDataError("product target: pass ell0 explicitly")
    v_star = target.warping.v_star()
    ramp_budget = 0.95 * spec.energy_slack
    leash_budget = 0.05 * spec.energy_slack

    def violation(ell):
        X = collar_width(ell, "cylinder", d)
        e_ramp, e_leash = _ramp_leash_energies(spec, v_star, X)
        return max(e_ramp - ramp_budget, e_leash - leash_budget)

    lo, hi = 1e-10, 1.0
    if violation(lo) > 0:
        raise InitialDataError("energy slack unreachable even at ell = 1e-10")
    if violation(hi) < 0:
        ell = hi
    else:
        ell = brentq(violation, lo, hi, xtol=1e-14, rtol=1e-12)
        ell *= 1.0 - 1e-9  # land strictly inside the feasible side
    ell = min(ell, spec.ell_cap)
    if vbar_cap and target.warping.vbar > 0.0:
        ell = min(ell, 5.0 * math.pi**2 / target.warping.vbar**2)
    return ell


def build_profiles(spec: InitialDataSpec, target: TargetGeometry, grid: CollarGrid):
    """Half-profiles (v, r, z) of the initial map on grid nodes xi >= 0."""
    X = grid.X
    l1, l2 = spec.lambda1, spec.lambda2
    if l1 + l2 + 4.0 > X:
        raise InitialDataError(
            f"collar too short: X = {X:.2f} < Lambda1 + Lambda2 + 4 = {l1 + l2 + 4:.2f}")
    s = grid.s[grid.n // 2:]
    eps, z0 = spec.eps, spec.z0

    r = np.empty_like(s)
    z = np.empty_like(s)

    sphere = s <= l1 - 1.0
    r[sphere] = 1.0 / np.cosh(s[sphere])
    z[sphere] = np.tanh(s[sphere])

    capband = (s > l1 - 1.0) & (s < l1)
    theta_eps = math.atan2(1.0 / math.cosh(l1 - 1.0), math.tanh(l1 - 1.0))
    th = theta_eps * (1.0 - _smoothstep(s[capband] - (l1 - 1.0)))
    r[capband] = np.sin(th)
    z[capband] = np.cos(th)

    leash = (s >= l1) & (s <= X - l2)
    z[leash] = 1.0 + (s[leash] - l1) / (X - l1 - l2) * (z0 - 1.0)
    r[leash] = 0.0

    open_band = (s > X - l2) & (s < X - l2 + 1.0)
    r[open_band] = eps * _smoothstep(s[open_band] - (X - l2))
    z[open_band] = z0

    annulus = s >= X - l2 + 1.0
    r[annulus] = 0.25 * np.exp(s[annulus] - X)
    z[annulus] = z0

    if target.warping.kind == "const":
        v = np.zeros_like(s)
        v_star = 0.0
    else:
        v_star = target.warping.v_star()
        v = np.where(s <= l1, v_star, v_star * (X - s) / (X - l1))
    v[-1] = 0.0
    r[-1] = 0.25
    z[-1] = z0
    return v, r, z, v_star


PIECES = ("sphere", "cap_blend", "leash", "open_blend", "annulus")


def _piece_masks(spec: InitialDataSpec, grid: CollarGrid):
    """Cell masks (by cell midpoint |s|) for the budget table."""
    X = grid.X
    l1, l2 = spec.lambda1, spec.lambda2
    smid = np.abs(0.5 * (grid.s[:-1] + grid.s[1:]))
    return {
        "sphere": smid <= l1 - 1.0,
        "cap_blend": (smid > l1 - 1.0) & (smid < l1),
        "leash": (smid >= l1) & (smid <= X - l2),
        "open_blend": (smid > X - l2) & (smid < X - l2 + 1.0),
        "annulus": smid >= X - l2 + 1.0,
    }


def certify_budget(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                   spec: InitialDataSpec) -> dict:
    """Per-piece energy table; raises naming the overweight piece."""
    f = assemble_fields(m, grid, target)
    cell_e = math.pi * grid.h * (f.Dv**2 + f.a * (f.Dr**2 + f.Dz**2)
                                 + 0.5 * (f.FP[:-1] * f.r[:-1]**2 + f.FP[1:] * f.r[1:]**2))
    masks = _piece_masks(spec, grid)
    table = {name: float(np.sum(cell_e[mask])) for name, mask in masks.items()}
    table["total"] = float(np.sum(cell_e))

    X = grid.X
    v_star = 0.0 if target.warping.kind == "const" else target.warping.v_star()
    bounds = {
        # coarse grids overshoot the conformal sphere energy by O(h^2); the
        # reference-resolution 0.5 percent check lives in the test suite
        "sphere": 8.0 * math.pi * 1.02 if target.warping.kind != "const" else math.inf,
        "annulus": 2.0 * 8.0 * math.pi * (0.25**2 - 0.9 * spec.eps**2) * 1.01,
        "leash": spec.energy_slack,
        "open_blend": 1.0,
        "cap_blend": 1.0,
        "total": ENERGY_BUDGET,
    }
    # the ramp energy lives inside the leash/annulus bands via v; report it
    ramp_gap = X - spec.lambda1
    table["v_ramp_bound"] = 2.0 * math.pi * v_star**2 / ramp_gap if ramp_gap > 0 else math.inf
    for name, bound in bounds.items():
        if table[name] > bound:
            raise InitialDataError(
                f"energy budget violated by piece {name!r}: {table[name]:.4f} > {bound:.4f}")
    return table


def build_initial(spec: InitialDataSpec, target: TargetGeometry, n: int,
                  d: float = 1.0, ell0: float | None = None,
                  stretch: StretchSpec | None = None):
    """Assemble the initial state; returns (SymmetricMap, ell0, grid, budget table)."""
    if ell0 is None:
        ell0 = select_ell0(spec, target, d)
    metric = CollarMetric(ell0, "cylinder", d)
    grid = build_grid(n, metric, stretch)
    v, r, z, _ = build_profiles(spec, target, grid)
    m = SymmetricMap(v_half=v, r_half=r, z_half=z, z0=spec.z0)
    m.check_invariants()

    vfull, rfull, zfull = m.full()
    radius = np.hypot(rfull, zfull)
    if np.min(radius) < 1.0 - 1e-12:
        raise InitialDataError("initial image enters the open unit ball")
    table = certify_budget(m, grid, target, spec)
    return m, ell0, grid, table
