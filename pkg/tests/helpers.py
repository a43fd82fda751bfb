"""Shared fixtures and oracle utilities for the test suite."""

from __future__ import annotations

import math

import numpy as np

from collarflow.collar import CollarMetric
from collarflow.grid import CollarGrid, build_grid
from collarflow.symmap import SymmetricMap, RawMap, assemble_fields, energy_from_fields, tension
from collarflow.target import TargetGeometry, make_warping


def default_target(kind: str = "poly", vbar: float = 0.0) -> TargetGeometry:
    if kind == "poly":
        w = make_warping("poly", vbar=vbar, delta=0.5, c3=3.8, lam=49.0)
    elif kind == "exp":
        w = make_warping("exp", vbar=vbar, alpha=2.0 * math.pi, c3=0.0195, lam=57.0)
    elif kind == "const":
        w = make_warping("const", vbar=vbar)
    else:
        raise ValueError(kind)
    return TargetGeometry.build(1e6, w)


def smooth_half_profile(rng, m, amp=1.0, modes=6):
    """Random even-extension-smooth profile on xi in [0, 1] (zero slope at 0)."""
    xi = np.linspace(0.0, 1.0, m)
    out = np.zeros(m)
    for k in range(1, modes + 1):
        out += rng.normal(0.0, amp / k**2) * np.cos(math.pi * k * xi)
    return out


def random_admissible_map(rng, grid: CollarGrid, z0: float = 1.2,
                          v_amp: float = 2.0) -> SymmetricMap:
    """Random smooth symmetric state honoring boundary data, image mostly
    outside the unit ball (physically admissible regime)."""
    m = grid.n // 2 + 1
    xi = np.linspace(0.0, 1.0, m)
    v = v_amp * np.abs(smooth_half_profile(rng, m, amp=1.0))
    v *= (1.0 - xi**2)  # pin boundary
    v[-1] = 0.0
    base_r = 1.1 + 0.5 * np.abs(smooth_half_profile(rng, m, amp=0.3))
    r = base_r + (0.25 - base_r) * xi**4
    r[-1] = 0.25
    z = z0 * xi + 0.2 * np.sin(math.pi * xi) * rng.uniform(-1, 1)
    z[0], z[-1] = 0.0, z0
    return SymmetricMap(v_half=v, r_half=r, z_half=z, z0=z0)


def random_symmetric_direction(rng, grid: CollarGrid, modes: int = 8):
    """Smooth symmetric variation (dv, dr, dz) vanishing at the boundary."""
    m = grid.n // 2 + 1
    xi = np.linspace(0.0, 1.0, m)
    def half(even: bool):
        out = np.zeros(m)
        for k in range(1, modes + 1):
            out += rng.normal(0.0, 1.0 / k) * np.cos(math.pi * k * xi)
        out *= (1.0 - xi**2)
        if not even:
            out *= xi  # odd profiles vanish at the axis
        out[-1] = 0.0
        return out
    dv_h, dr_h, dz_h = half(True), half(True), half(False)
    dz_h[0] = 0.0
    dv = np.concatenate([dv_h[:0:-1], dv_h])
    dr = np.concatenate([dr_h[:0:-1], dr_h])
    dz = np.concatenate([-dz_h[:0:-1], dz_h])
    return dv, dr, dz


def weak_identity_relative_error(m: SymmetricMap, grid: CollarGrid, target,
                                 rng, eps: float = 1e-5) -> float:
    """|<tau, zeta>_g + dE[zeta]| / |<tau, zeta>_g| for a random direction.

    dE[zeta] by centered finite differences of the discrete energy; the
    identity <tau, zeta>_g = -dE[zeta] is the defining property of tau.
    """
    dv, dr, dz = random_symmetric_direction(rng, grid)
    f = assemble_fields(m, grid, target)
    tau_v, tau_r, tau_z, _ = tension(m, grid, target, f)
    mass_v = 2.0 * math.pi * grid.rho2 * grid.w_trap
    mass_w = mass_v * f.FP
    pair = float(np.dot(mass_v, tau_v * dv) + np.dot(mass_w, tau_r * dr + tau_z * dz))

    v, r, z = m.full()
    scale = max(np.max(np.abs(v)), np.max(np.abs(r)), np.max(np.abs(z)), 1.0)
    step = eps * scale
    ep = energy_from_fields(assemble_fields(
        RawMap(v + step * dv, r + step * dr, z + step * dz), grid, target), grid)
    em = energy_from_fields(assemble_fields(
        RawMap(v - step * dv, r - step * dr, z - step * dz), grid, target), grid)
    de = (ep - em) / (2.0 * step)
    return abs(pair + de) / max(abs(pair), 1e-30)


def gram_projection_b0(m, grid: CollarGrid, target, jmax: int = 8,
                       n_theta: int = 64) -> float:
    """Brute-force oracle for the Hopf projection coefficient b0.

    Assembles the complex basis {e^{j z} dz^2, |j| <= jmax}, restricts to
    the real-linear subspace of differentials real on both boundary circles
    (via an SVD nullspace), forms the Gram matrix in the weighted inner
    product int phi psi rho^{-2} ds dtheta, projects the Hopf function of
    the state and reads off the dz^2 coefficient.
    """
    from collarflow.symmap import hopf

    X = grid.X
    js = np.arange(-jmax, jmax + 1)
    nb = len(js)
    # real-on-boundary constraints: for each j, c_j e^{+-jX} = conj(c_{-j}) e^{-+jX}
    rows = []
    for sgn in (+1.0, -1.0):
        for j in js:
            # c_j e^{sgn j X} - conj(c_{-j}) e^{-sgn j X} = 0, split into Re/Im
            row_re = np.zeros(2 * nb)
            row_im = np.zeros(2 * nb)
            ij = np.where(js == j)[0][0]
            imj = np.where(js == -j)[0][0]
            # scale both exponentials to avoid overflow: divide by e^{|j| X}
            ep = math.exp(min(sgn * j * X - abs(j) * X, 0.0))
            em = math.exp(min(-sgn * j * X - abs(j) * X, 0.0))
            row_re[ij] += ep
            row_re[imj] -= em
            row_im[nb + ij] += ep
            row_im[nb + imj] += em
            rows.append(row_re)
            rows.append(row_im)
    A = np.array(rows)
    _, sv, vt = np.linalg.svd(A)
    null = vt[len(sv[sv > 1e-12 * sv[0]]):]
    assert null.shape[0] >= 1

    theta = np.linspace(0.0, 2.0 * math.pi, n_theta, endpoint=False)
    dtheta = 2.0 * math.pi / n_theta
    # basis functions evaluated on the (s, theta) grid, normalized by e^{|j| X}
    s = grid.s

    def null_vec_fn(coef):
        c = coef[:nb] + 1j * coef[nb:]
        out = np.zeros((len(s), n_theta))
        for jj, cj in zip(js, c):
            if cj == 0:
                continue
            radial = np.exp(jj * s - abs(jj) * X)
            out += np.real(cj * np.outer(radial, np.exp(1j * jj * theta)))
        return out

    basis = [null_vec_fn(coef) for coef in null]
    # drop numerically null functions (constraints can leave ghost directions)
    basis = [b for b in basis if np.max(np.abs(b)) > 1e-13]

    weight = np.outer(grid.w_trap * grid.rho_m2, np.full(n_theta, dtheta))
    psi_profile, _ = hopf(m, grid, target)
    hopf_fn = np.outer(psi_profile / (2.0 * math.pi), np.ones(n_theta))

    G = np.array([[float(np.sum(weight * bi * bj)) for bj in basis] for bi in basis])
    rhs = np.array([float(np.sum(weight * bi * hopf_fn)) for bi in basis])
    coefs = np.linalg.solve(G, rhs)
    proj = sum(c * b for c, b in zip(coefs, basis))
    # dz^2 coefficient: the constant mode of the projection
    const_mode = np.ones_like(proj)
    return float(np.sum(weight * proj * const_mode) / np.sum(weight * const_mode**2))
