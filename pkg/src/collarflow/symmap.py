"""Symmetric maps from the collar into the warped product, and their observables.

A symmetric map is determined by three profiles on the collar coordinate:
v even, r even and nonnegative, z odd, with Dirichlet data
v(+-X) = 0, r(+-X) = 1/4, z(+-X) = +- z0.  Only the half xi >= 0 is stored;
the full profiles are reconstructed by reflection, so the symmetries hold
exactly by construction.

With F = f(v) and P = rho_Nt^2(sqrt(r^2+z^2)) the flat energy integrand is
|u_s|^2 + |u_theta|^2 = v_s^2 + F P (r_s^2 + z_s^2) + F P r^2 and the
discrete energy integrates the piecewise-linear interpolant of the
derivative terms exactly (cell differences) plus the trapezoid rule for the
zeroth-order term.  The tension is minus the exact gradient of this discrete
energy divided by the diagonal L^2(dv_g) mass, so the weak identity
< tau, zeta >_g = -dE[zeta] holds to rounding for every nodal variation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import CollarGrid
from .target import TargetGeometry

R_BOUNDARY = 0.25


@dataclass(frozen=True)
class SymmetricMap:
    """Half-stored symmetric state; index j <-> xi_j = j / (n/2) in [0, 1]."""

    v_half: np.ndarray = field(repr=False)
    r_half: np.ndarray = field(repr=False)
    z_half: np.ndarray = field(repr=False)
    z0: float = 1.2

    def __post_init__(self):
        m = len(self.v_half)
        if len(self.r_half) != m or len(self.z_half) != m:
            raise ValueError("component arrays must share a length")

    @property
    def n(self) -> int:
        return 2 * (len(self.v_half) - 1)

    @classmethod
    def from_full(cls, v: np.ndarray, r: np.ndarray, z: np.ndarray, z0: float,
                  enforce_boundary: bool = True) -> "SymmetricMap":
        """Fold full-grid arrays to the half representation (symmetrizing)."""
        n = len(v) - 1
        m = n // 2
        vh = 0.5 * (v[m:] + v[m::-1])
        rh = np.maximum(0.5 * (r[m:] + r[m::-1]), 0.0)
        zh = 0.5 * (z[m:] - z[m::-1])
        zh[0] = 0.0
        if enforce_boundary:
            vh[-1] = 0.0
            rh[-1] = R_BOUNDARY
            zh[-1] = z0
        return cls(v_half=vh, r_half=rh, z_half=zh, z0=z0)

    def full(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        vh, rh, zh = self.v_half, self.r_half, self.z_half
        v = np.concatenate([vh[:0:-1], vh])
        r = np.concatenate([rh[:0:-1], rh])
        z = np.concatenate([-zh[:0:-1], zh])
        return v, r, z

    def check_invariants(self) -> None:
        if np.any(~np.isfinite(self.v_half)) or np.any(~np.isfinite(self.r_half)) \
                or np.any(~np.isfinite(self.z_half)):
            raise ArithmeticError("non-finite state")
        if np.any(self.r_half < 0):
            raise ValueError("negative radius")
        if abs(self.v_half[-1]) > 1e-14 or abs(self.r_half[-1] - R_BOUNDARY) > 1e-14 \
                or abs(self.z_half[-1] - self.z0) > 1e-14 or abs(self.z_half[0]) > 1e-14:
            raise ValueError("boundary/symmetry data violated")


@dataclass(frozen=True)
class RawMap:
    """Full-grid profiles without the symmetry fold.

    Observables only consume ``full()``, so synthetic states (odd v, moving
    boundary values, oracle fixtures) can be fed through the same code
    paths.  The flow itself always works with SymmetricMap.
    """

    v: np.ndarray = field(repr=False)
    r: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)
    z0: float = 0.0

    def full(self):
        return self.v, self.r, self.z


@dataclass
class Fields:
    """Per-node and per-cell quantities shared by energy, gradient, observables."""

    v: np.ndarray
    r: np.ndarray
    z: np.ndarray
    F: np.ndarray
    Fp: np.ndarray          # f'(v)
    P: np.ndarray
    dPdr: np.ndarray
    dPdz: np.ndarray
    FP: np.ndarray
    a: np.ndarray           # cell coefficient: edge average of FP
    Dv: np.ndarray          # cell slopes
    Dr: np.ndarray
    Dz: np.ndarray


def assemble_fields(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry) -> Fields:
    v, r, z = m.full()
    F = np.asarray(target.f(v), dtype=float)
    Fp = np.asarray(target.f_prime(v), dtype=float)
    P = np.asarray(target.P(r, z), dtype=float)
    dPdr, dPdz = target.P_grad(r, z)
    FP = F * P
    a = 0.5 * (FP[:-1] + FP[1:])
    h = grid.h
    Dv = np.diff(v) / h
    Dr = np.diff(r) / h
    Dz = np.diff(z) / h
    return Fields(v=v, r=r, z=z, F=F, Fp=Fp, P=P, dPdr=np.asarray(dPdr, dtype=float),
                  dPdz=np.asarray(dPdz, dtype=float), FP=FP, a=a, Dv=Dv, Dr=Dr, Dz=Dz)


# ---------------------------------------------------------------------------
# energy and its exact gradient
# ---------------------------------------------------------------------------

def energy_from_fields(f: Fields, grid: CollarGrid) -> float:
    h, w = grid.h, grid.w_trap
    cells = np.dot(h, f.Dv**2 + f.a * (f.Dr**2 + f.Dz**2))
    nodal = np.dot(w, f.FP * f.r**2)
    return math.pi * (cells + nodal)


def energy(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry) -> float:
    E = energy_from_fields(assemble_fields(m, grid, target), grid)
    if not math.isfinite(E):
        raise ArithmeticError("non-finite energy")
    return E


def energy_with_conformal_factors(m: SymmetricMap, grid: CollarGrid,
                                  target: TargetGeometry) -> float:
    """Same discrete energy with the rho^2 dv_g-weights written out.

    E = 1/2 int |du|_g^2 dv_g with |du|_g^2 = rho^{-2} (flat integrand); the
    conformal factors cancel algebraically, so this must agree with
    `energy` to rounding for every state and every ell.
    """
    f = assemble_fields(m, grid, target)
    h, w = grid.h, grid.w_trap
    rho_mid2 = (0.5 * (grid.rho[:-1] + grid.rho[1:])) ** 2
    cells = np.dot(h, (f.Dv**2 + f.a * (f.Dr**2 + f.Dz**2)) / rho_mid2 * rho_mid2)
    nodal = np.dot(w, (f.FP * f.r**2) / grid.rho2 * grid.rho2)
    return math.pi * (cells + nodal)


def energy_gradient(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                    f: Fields | None = None):
    """Exact gradient of the discrete energy wrt the full nodal arrays."""
    if f is None:
        f = assemble_fields(m, grid, target)
    h, w = grid.h, grid.w_trap
    n1 = len(f.v)

    # quadratic-derivative parts: d/dq_k of sum_c a_c (Dq_c)^2 h_c
    gv = np.zeros(n1)
    gr = np.zeros(n1)
    gz = np.zeros(n1)
    gv[:-1] -= 2.0 * f.Dv
    gv[1:] += 2.0 * f.Dv
    gr[:-1] -= 2.0 * f.a * f.Dr
    gr[1:] += 2.0 * f.a * f.Dr
    gz[:-1] -= 2.0 * f.a * f.Dz
    gz[1:] += 2.0 * f.a * f.Dz

    # coefficient variations: a_c depends on FP at both cell ends
    q2h = (f.Dr**2 + f.Dz**2) * h          # (Dr^2 + Dz^2) h per cell
    spread = np.zeros(n1)
    spread[:-1] += 0.5 * q2h
    spread[1:] += 0.5 * q2h
    gv += f.Fp * f.P * spread
    gr += f.F * f.dPdr * spread
    gz += f.F * f.dPdz * spread

    # nodal theta-term: w FP r^2
    gv += w * f.Fp * f.P * f.r**2
    gr += w * (f.F * f.dPdr * f.r**2 + 2.0 * f.FP * f.r)
    gz += w * f.F * f.dPdz * f.r**2

    return math.pi * gv, math.pi * gr, math.pi * gz


def tension_norm_precise(m: SymmetricMap, grid: CollarGrid,
                         target: TargetGeometry) -> float:
    """Tension norm in extended precision.

    Near the harmonic limit the float64 gradient noise (cancellation at
    machine epsilon times the state scale), divided by the tiny collar mass
    rho^2 at the centre, floors the evaluable tension norm around 1e-7 for
    short collars; the 80-bit path pushes the floor below the inner
    tolerance at every length the runs reach.
    """
    v, r, z = (np.asarray(a, dtype=np.longdouble) for a in m.full())
    h = np.asarray(grid.s, dtype=np.longdouble)
    h = np.diff(h)
    w = np.zeros(len(v), dtype=np.longdouble)
    w[:-1] += h / 2.0
    w[1:] += h / 2.0
    F = np.asarray(target.f(v), dtype=np.longdouble)
    Fp = np.asarray(target.f_prime(v), dtype=np.longdouble)
    P = np.asarray(target.P(r, z), dtype=np.longdouble)
    dPdr, dPdz = target.P_grad(r, z)
    dPdr = np.asarray(dPdr, dtype=np.longdouble)
    dPdz = np.asarray(dPdz, dtype=np.longdouble)
    FP = F * P
    a = 0.5 * (FP[:-1] + FP[1:])
    Dv, Dr, Dz = np.diff(v) / h, np.diff(r) / h, np.diff(z) / h

    gv = np.zeros_like(v)
    gr = np.zeros_like(v)
    gz = np.zeros_like(v)
    gv[:-1] -= 2.0 * Dv
    gv[1:] += 2.0 * Dv
    gr[:-1] -= 2.0 * a * Dr
    gr[1:] += 2.0 * a * Dr
    gz[:-1] -= 2.0 * a * Dz
    gz[1:] += 2.0 * a * Dz
    q2h = (Dr**2 + Dz**2) * h
    spread = np.zeros_like(v)
    spread[:-1] += 0.5 * q2h
    spread[1:] += 0.5 * q2h
    gv += Fp * P * spread
    gr += F * dPdr * spread
    gz += F * dPdz * spread
    gv += w * Fp * P * r**2
    gr += w * (F * dPdr * r**2 + 2.0 * FP * r)
    gz += w * F * dPdz * r**2

    # true gradient = pi * (raw sums above); mass = 2 pi rho^2 w (coeff):
    # |tau|^2 = sum g^2 / M = (pi / 2) sum raw^2 / (rho^2 w coeff)
    rho2w = np.asarray(grid.rho, dtype=np.longdouble) ** 2 * w
    norm2 = np.sum(gv[1:-1] ** 2 / rho2w[1:-1]
                   + (gr[1:-1] ** 2 + gz[1:-1] ** 2) / (rho2w[1:-1] * FP[1:-1]))
    return float(np.sqrt(norm2 * math.pi / 2.0))


def tension(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
            f: Fields | None = None):
    """Tension field (tau_v, tau_r, tau_z) and its L^2(dv_g) norm.

    tau = -M^{-1} grad E with the diagonal mass M = 2 pi rho^2 w_trap times
    the target metric coefficient (1 for v; F P for r and z).  Boundary rows
    are zero: variations vanish there (Dirichlet data).
    """
    if f is None:
        f = assemble_fields(m, grid, target)
    gv, gr, gz = energy_gradient(m, grid, target, f)
    mass_v = 2.0 * math.pi * grid.rho2 * grid.w_trap
    mass_w = mass_v * f.FP
    tau_v = -gv / mass_v
    tau_r = -gr / mass_w
    tau_z = -gz / mass_w
    tau_v[0] = tau_v[-1] = 0.0
    tau_r[0] = tau_r[-1] = 0.0
    tau_z[0] = tau_z[-1] = 0.0
    norm2 = float(np.dot(mass_v[1:-1], tau_v[1:-1] ** 2)
                  + np.dot(mass_w[1:-1], tau_r[1:-1] ** 2 + tau_z[1:-1] ** 2))
    return tau_v, tau_r, tau_z, math.sqrt(max(norm2, 0.0))


# ---------------------------------------------------------------------------
# pointwise observables
# ---------------------------------------------------------------------------

def hopf(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
         f: Fields | None = None):
    """(psi profile, b0).

    psi(s) = 2 pi (|u_s|^2 - |u_theta|^2), with node derivatives from the
    fourth-order stencils (the Hopf function is tiny on degenerate collars,
    so second-order derivative noise from the order-one central features
    would otherwise swamp it).  b0 is the rho^{-2}-weighted mean of the
    Hopf function: the dz^2 coefficient of the L^2-orthogonal projection of
    Re Phi onto holomorphic quadratic differentials real on the boundary
    (all other basis elements carry nonzero theta-frequency).
    """
    if f is None:
        f = assemble_fields(m, grid, target)
    vs = grid.deriv(f.v)
    rs = grid.deriv(f.r)
    zs = grid.deriv(f.z)
    psi = 2.0 * math.pi * (vs**2 + f.FP * (rs**2 + zs**2) - f.FP * f.r**2)
    num = grid.trapz(psi * grid.rho_m2)
    den = 2.0 * math.pi * grid.trapz(grid.rho_m2)
    return psi, num / den


def angular_energy(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                   f: Fields | None = None) -> np.ndarray:
    """theta(s) = int_{S^1} |u_theta|^2 dtheta = 2 pi F P r^2."""
    if f is None:
        f = assemble_fields(m, grid, target)
    return 2.0 * math.pi * f.FP * f.r**2


def leash(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
          f: Fields | None = None) -> float:
    """Image length scale: int sqrt(v_s^2 + F P (r_s^2 + z_s^2)) ds."""
    if f is None:
        f = assemble_fields(m, grid, target)
    return float(np.dot(grid.h, np.sqrt(f.Dv**2 + f.a * (f.Dr**2 + f.Dz**2))))


def v_max(m: SymmetricMap) -> float:
    return float(np.max(m.v_half))


def area_w(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
           f: Fields | None = None) -> float:
    """Area of the rotationally symmetric w-image in the bump metric."""
    if f is None:
        f = assemble_fields(m, grid, target)
    pr = f.P * f.r
    pr_mid = 0.5 * (pr[:-1] + pr[1:])
    return float(2.0 * math.pi * np.dot(grid.h, pr_mid * np.sqrt(f.Dr**2 + f.Dz**2)))


def disjointness_check(m: SymmetricMap, target: TargetGeometry,
                       tol: float = 1e-3) -> bool:
    """True iff no node lies on the protected sphere-band of radius r_max.

    The band is { |p| within tol of r_max, polar angle in [pi/4, 3 pi/4] }.
    """
    v, r, z = m.full()
    rad = np.hypot(r, z)
    ang = np.arctan2(r, z)  # angle from the positive z-axis
    onband = (np.abs(rad - target.r_max) <= tol) \
        & (ang >= math.pi / 4.0 - 1e-12) & (ang <= 3.0 * math.pi / 4.0 + 1e-12)
    return not bool(np.any(onband))


# ---------------------------------------------------------------------------
# low-energy decomposition of the collar
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegionSets:
    """The high-energy set A (intervals), the buffered sets B, Btilde (node
    masks) and the connected components of the complement of B."""

    a_intervals: list
    b_mask: np.ndarray
    btilde_mask: np.ndarray
    components: list          # (s_left, s_right, length, sup_rho, inf_rho)
    window_energy: np.ndarray


def _mask_to_intervals(mask: np.ndarray, s: np.ndarray) -> list:
    out = []
    i = 0
    n1 = len(mask)
    while i < n1:
        if mask[i]:
            j = i
            while j + 1 < n1 and mask[j + 1]:
                j += 1
            out.append((float(s[i]), float(s[j])))
            i = j + 1
        else:
            i += 1
    return out


def region_sets(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                eps0: float = 0.05, f: Fields | None = None) -> RegionSets:
    """A = end bands + { |s| <= X-1 : E(u; [s-1, s+1] x S^1) >= eps0 };
    B needs distance 4 log(1/rho) + 2 from A, Btilde distance 4 log(1/ell) + 2."""
    X = grid.X
    if X < 2.0:
        raise ValueError("collar too short for the decomposition (X < 2)")
    if f is None:
        f = assemble_fields(m, grid, target)
    s = grid.s
    cell_e = math.pi * (grid.h * (f.Dv**2 + f.a * (f.Dr**2 + f.Dz**2))
                        + grid.h * 0.5 * (f.FP[:-1] * f.r[:-1]**2 + f.FP[1:] * f.r[1:]**2))
    ecum = np.concatenate([[0.0], np.cumsum(np.asarray(cell_e, dtype=float))])
    wen = np.interp(np.minimum(s + 1.0, X), s, ecum) \
        - np.interp(np.maximum(s - 1.0, -X), s, ecum)

    amask = (np.abs(s) >= X - 1.0) | ((np.abs(s) <= X - 1.0) & (wen >= eps0))
    a_iv = _mask_to_intervals(amask, s)

    # distance from each node to the union of A-intervals
    dist = np.full(len(s), np.inf)
    for (lo, hi) in a_iv:
        inside = (s >= lo) & (s <= hi)
        dist[inside] = 0.0
        dist = np.minimum(dist, np.where(s < lo, lo - s, np.where(s > hi, s - hi, 0.0)))

    b_mask = dist >= 4.0 * np.log(1.0 / grid.rho) + 2.0
    bt_mask = dist >= 4.0 * math.log(1.0 / grid.ell) + 2.0

    comps = []
    for (lo, hi) in _mask_to_intervals(~b_mask, s):
        sel = (s >= lo) & (s <= hi)
        rr = grid.rho[sel]
        comps.append((lo, hi, hi - lo, float(np.max(rr)), float(np.min(rr))))
    return RegionSets(a_intervals=a_iv, b_mask=b_mask, btilde_mask=bt_mask,
                      components=comps, window_energy=wen)


# ---------------------------------------------------------------------------
# snapshot export
# ---------------------------------------------------------------------------

def snapshot_table(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry) -> np.ndarray:
    """Columns (xi, s, v, r, z, psi, theta), one row per node."""
    f = assemble_fields(m, grid, target)
    psi, _ = hopf(m, grid, target, f)
    th = angular_energy(m, grid, target, f)
    return np.column_stack([grid.xi, grid.s, f.v, f.r, f.z, psi, th])
