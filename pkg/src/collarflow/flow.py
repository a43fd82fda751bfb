"""Time integration of the coupled flow and of the rescaled flow.

Map steps are backward-Euler steps of the L^2(dv_g) gradient flow, solved
by a modified Newton iteration with a banded Hessian of the discrete
energy (finite-difference coloring: gradient supports span one cell, so
columns three nodes apart are independent).  A backward-Euler step is a
proximal step of the energy, so accepted steps never raise it; on top of
that a step-doubling error estimate drives a PI step-size controller.

The harmonic relaxation used by the rescaled flow solves the stationary
equation directly with a Levenberg-style damping (mass-matrix regularized
Newton), warm-started along the length continuation.

Gauge: the stretched grid xi -> S(xi; X(ell)) is the material frame (it
replaces the unavailable uniformizing diffeomorphism family): map arrays
live at fixed xi while the node positions s_i = S(xi_i; X) ride the
evolving length.  The stretch keeps both the centre features and the
boundary-anchored features at essentially fixed xi, so the material map
velocity is the tension alone and no advection term appears.  In this
gauge dE/dt = -|tau|^2 + (dE/dell) elldot exactly.  All reported
quantities are gauge-geometric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import solve_banded

from .collar import CollarMetric
from .grid import CollarGrid, StretchSpec, build_grid
from .symmap import (
    Fields,
    RawMap,
    SymmetricMap,
    assemble_fields,
    energy_from_fields,
    energy_gradient,
    hopf,
    region_sets,
    tension,
    tension_norm_precise,
)
from .target import TargetGeometry


class FlowError(RuntimeError):
    pass


class TimestepUnderflow(FlowError):
    """dt fell below dt_min; near degeneration this terminates the run."""


class InnerSolveFailure(FlowError):
    def __init__(self, msg, last_tension):
        super().__init__(msg)
        self.last_tension = last_tension


@dataclass
class FlowParams:
    eta: float = 1.0
    d: float = 1.0
    mode: str = "full"            # full | rescaled
    dt_init: float = 1e-3
    dt_min: float = 1e-14
    dt_max: float = 5.0
    safety: float = 0.85
    rtol: float = 1e-4            # trajectory tolerance (step doubling)
    atol: float = 1e-7
    pre_relax_tension: float = 0.01   # full mode: damp the initial corner
    # transient (it moves ell by less than one step's budget) with a
    # frozen-ell relaxation down to this tension before the coupled stepping
    tol_inner: float = 1e-7
    ell_stop: float = 1e-4
    t_max: float = 50.0
    eps0: float = 0.05            # window threshold for the region sets
    max_dlog_ell: float = 0.02    # per-step cap on |d log ell|
    max_rel_dell: float = 0.1     # hard cap |delta ell| <= 0.1 ell
    energy_guard: float = 1e-8    # per-step allowed energy increase, times E0
    relax_max_steps: int = 20_000
    newton_max_iter: int = 8

    def __post_init__(self):
        if self.dt_min <= 0 or self.ell_stop <= 0 or self.tol_inner <= 0:
            raise ValueError("dt_min, ell_stop, tol_inner must be positive")
        if self.mode not in ("full", "rescaled"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass
class FlowState:
    map: SymmetricMap
    ell: float
    t: float
    grid: CollarGrid
    dt: float
    energy: float
    tension_norm: float
    b0: float
    err_prev: float = 1.0
    n_accept: int = 0
    n_reject: int = 0


def length_ode_rhs(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                   params: FlowParams, f: Fields | None = None,
                   quasi_static: bool = False) -> tuple[float, float]:
    """(d ell / dt, effective b0).  Full mode carries the factor eta^2 / 4.

    For harmonic maps the Hopf function is constant on the collar, and its
    profile derivative is controlled by the tension in general, so whenever
    the state is harmonic (rescaled mode) or quasi-static (full mode under
    the tension gate) the value on the buffered low-energy set Btilde is
    the numerically clean estimate of b0: the raw weighted integral picks
    up the high-energy regions' profile-sampling noise, which the factor
    ell^{-2} in the length ODE would otherwise amplify into a spurious,
    resolution-dependent drift (visible on the product-target control,
    where the true constant is exponentially small).
    """
    psi, b0 = hopf(m, grid, target, f)
    if (params.mode == "rescaled" or quasi_static) and grid.X > 20.0:
        reg = region_sets(m, grid, target, eps0=params.eps0, f=f)
        bt = reg.btilde_mask
        if np.count_nonzero(bt) > 8:
            w = grid.w_trap[bt]
            b0 = float(np.dot(w, psi[bt]) / np.sum(w)) / (2.0 * math.pi)
    rate = -(2.0 * math.pi**2 / grid.ell) * b0
    if params.mode == "full":
        rate *= params.eta**2 / 4.0
    return rate, float(b0)


# ---------------------------------------------------------------------------
# interleaved vector helpers
# ---------------------------------------------------------------------------

def _interleave(v, r, z):
    out = np.empty(3 * len(v), dtype=np.result_type(v, r, z))
    out[0::3], out[1::3], out[2::3] = v, r, z
    return out


def _deinterleave(u):
    return u[0::3], u[1::3], u[2::3]


def _gradient_vec(v, r, z, grid, target) -> np.ndarray:
    raw = RawMap(v, r, z)
    f = assemble_fields(raw, grid, target)
    gv, gr, gz = energy_gradient(raw, grid, target, f)
    return _interleave(gv, gr, gz)


def _mass_vec(grid: CollarGrid, fields: Fields) -> np.ndarray:
    mv = 2.0 * math.pi * grid.rho2 * grid.w_trap
    return _interleave(mv, mv * fields.FP, mv * fields.FP)


BANDW = 5  # interleaved bandwidth: node-neighbor coupling of 3 components


def hessian_banded(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                   fd_eps: float = 1e-6) -> np.ndarray:
    """Banded energy Hessian by forward differences of the exact gradient.

    Columns for the same component at nodes j and j+3 have disjoint row
    supports (the gradient couples only nearest neighbors), so nine colored
    perturbation groups recover every column: ten gradient evaluations.
    The O(eps) Jacobian error only affects the Newton contraction rate.
    """
    v, r, z = (np.asarray(a, dtype=float) for a in m.full())
    n1 = len(v)
    N = 3 * n1
    ab = np.zeros((2 * BANDW + 1, N))
    comps = (v, r, z)
    scales = [fd_eps * max(1.0, float(np.max(np.abs(c)))) for c in comps]
    g0 = _gradient_vec(v, r, z, grid, target)
    for comp in range(3):
        base = comps[comp]
        eps = scales[comp]
        for stride in range(3):
            mask = np.zeros(n1)
            mask[stride::3] = 1.0
            pert = [c.copy() for c in comps]
            pert[comp] = base + eps * mask
            gp = _gradient_vec(*pert, grid, target)
            col = (gp - g0) / eps
            # columns 3j + comp, j = stride, stride+3, ...: rows 3(j-1)+k,
            # k = 0..8 (three components at nodes j-1, j, j+1)
            jarr = np.arange(stride, n1, 3)
            cix = 3 * jarr + comp
            for k in range(9):
                rows = 3 * (jarr - 1) + k
                ok = (rows >= 0) & (rows < N)
                ab[BANDW + k - 3 - comp, cix[ok]] = col[rows[ok]]
    return ab


def _newton_system(ab_h: np.ndarray, mass: np.ndarray, mu: float) -> np.ndarray:
    """(mu M + H) in banded form with identity boundary rows."""
    ab = ab_h.copy()
    ab[BANDW] += mu * mass
    n1 = len(mass) // 3
    # Dirichlet rows and columns: boundary unknowns decouple to identity
    for idx in list(range(3)) + list(range(3 * (n1 - 1), 3 * n1)):
        ab[:, idx] = 0.0
        ab[BANDW, idx] = 1.0
    # banded layout: entry (i, j) lives at ab[BANDW + i - j, j]
    for row in list(range(3)) + list(range(3 * (n1 - 1), 3 * n1)):
        for j in range(max(0, row - BANDW), min(3 * n1, row + BANDW + 1)):
            if j != row:
                ab[BANDW + row - j, j] = 0.0
    return ab


def _solve_newton(ab_sys: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # LAPACK path is float64; extended-precision states only need the
    # residual and norms at full precision, not the Newton direction
    return solve_banded((BANDW, BANDW), np.asarray(ab_sys, dtype=float),
                        np.asarray(rhs, dtype=float))


def _zero_boundary(vec: np.ndarray) -> np.ndarray:
    vec[:3] = 0.0
    vec[-3:] = 0.0
    return vec


# ---------------------------------------------------------------------------
# backward-Euler map step
# ---------------------------------------------------------------------------

def _be_step(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
             dt: float, ab_h: np.ndarray, mass: np.ndarray, params: FlowParams):
    """Solve M (u+ - u)/dt + grad E(u+) = 0 by modified Newton.

    Returns (map, converged).  The Jacobian M/dt + H is lagged (assembled at
    the step base), which keeps the iteration cheap; failures surface as
    converged=False and the caller reduces dt.
    """
    v0, r0, z0 = m.full()
    u0 = _interleave(v0, r0, z0)
    u = u0.copy()
    ab_sys = _newton_system(ab_h, mass, 1.0 / dt)

    fnorm0 = None
    for _ in range(params.newton_max_iter):
        v, r, z = _deinterleave(u)
        g = _gradient_vec(v, r, z, grid, target)
        F = mass * (u - u0) / dt + g
        _zero_boundary(F)
        fnorm = float(np.max(np.abs(F) / (mass / dt)))  # displacement-scaled
        if fnorm0 is None:
            fnorm0 = fnorm
        if fnorm <= max(5e-2 * params.atol, 1e-2 * fnorm0) or fnorm <= 1e-16:
            break
        du = _solve_newton(ab_sys, -F)
        if not np.all(np.isfinite(du)):
            return m, False
        u = u + du
    else:
        v, r, z = _deinterleave(u)
        g = _gradient_vec(v, r, z, grid, target)
        F = mass * (u - u0) / dt + g
        _zero_boundary(F)
        if float(np.max(np.abs(F) / (mass / dt))) > 0.1 * max(fnorm0, 1e-300):
            return m, False
    v, r, z = _deinterleave(u)
    return SymmetricMap.from_full(v, r, z, m.z0), True


def _scaled_err(m1: SymmetricMap, m2: SymmetricMap, rtol: float, atol: float) -> float:
    err = 0.0
    for a, b in ((m1.v_half, m2.v_half), (m1.r_half, m2.r_half), (m1.z_half, m2.z_half)):
        sc = atol + rtol * np.maximum(np.abs(a), np.abs(b))
        err = max(err, float(np.max(np.abs(a - b) / sc)))
    return err


def adaptive_map_step(m: SymmetricMap, grid: CollarGrid, target: TargetGeometry,
                      params: FlowParams, dt: float, err_prev: float,
                      e_ref: float | None = None,
                      guard_energy: bool = True):
    """Step-doubling controlled backward-Euler step at frozen ell.

    Returns (map, dt_taken, dt_next, err, tension_norm, n_rejects).  With
    guard_energy the per-step energy increase is capped (pure map steps are
    proximal and must descend); the full flow guards at the whole-step level
    instead, where the metric contribution is included.
    """
    fields = assemble_fields(m, grid, target)
    if e_ref is None:
        e_ref = energy_from_fields(fields, grid)
    _, _, _, tn = tension(m, grid, target, fields)
    mass = _mass_vec(grid, fields)
    ab_h = hessian_banded(m, grid, target)

    rejects = 0
    while True:
        if dt < params.dt_min:
            raise TimestepUnderflow(f"dt underflow at dt={dt:.3e}")
        full, ok1 = _be_step(m, grid, target, dt, ab_h, mass, params)
        half1, ok2 = _be_step(m, grid, target, dt / 2.0, ab_h, mass, params)
        if ok2:
            half2, ok3 = _be_step(half1, grid, target, dt / 2.0, ab_h, mass, params)
        else:
            half2, ok3 = half1, False
        if ok1 and ok3:
            err = _scaled_err(full, half2, params.rtol, params.atol)
            accept = err <= 1.0
        else:
            err, accept = 4.0, False
        if accept and guard_energy:
            e_new = energy_from_fields(assemble_fields(half2, grid, target), grid)
            if not math.isfinite(e_new) or e_new > e_ref + params.energy_guard * max(e_ref, 1.0):
                accept = False
        if accept:
            fac = params.safety * (0.5 / err) ** 0.5 * err_prev ** 0.08 if err > 0 else 1.7
            growth_cap = 1.0 if rejects > 0 else 1.7
            dt_next = dt * min(growth_cap, max(0.25, fac))
            return half2, dt, min(dt_next, params.dt_max), max(err, 1e-8), tn, rejects
        dt *= 0.5
        rejects += 1


# ---------------------------------------------------------------------------
# harmonic relaxation (inner solve of the rescaled flow)
# ---------------------------------------------------------------------------

def relax_harmonic(m: SymmetricMap, ell: float, target: TargetGeometry,
                   params: FlowParams, grid: CollarGrid | None = None,
                   tol: float | None = None):
    """Drive the tension norm below tol at frozen ell.

    Levenberg-regularized Newton on the stationary equation grad E = 0: a
    damped step with mu ~ 1/dt is a backward-Euler substep of the heat
    flow, so for large mu this is the flow itself and for small mu it is
    Newton; mu adapts on energy descent.  Warm starts along the length
    continuation keep the iteration count small.
    """
    tol = params.tol_inner if tol is None else tol
    if grid is None:
        grid = build_grid(m.n, CollarMetric(ell, "cylinder", params.d))
    fields = assemble_fields(m, grid, target)
    e = energy_from_fields(fields, grid)
    _, _, _, tn = tension(m, grid, target, fields)
    mu = 1e2
    ab_h = None
    stale = True
    for it in range(params.relax_max_steps):
        if tn <= 100.0 * tol:
            # the float64 norm floors near the roundoff-over-mass level;
            # confirm against the extended-precision evaluation
            tn = tension_norm_precise(m, grid, target)
        if tn <= tol:
            return m, grid, tn, it
        if stale or it % 4 == 0:
            ab_h = hessian_banded(m, grid, target)
            stale = False
        fields = assemble_fields(m, grid, target)
        mass = _mass_vec(grid, fields)
        v, r, z = m.full()
        g = _gradient_vec(v, r, z, grid, target)
        _zero_boundary(g)
        improved = False
        for _ in range(40):
            ab_sys = _newton_system(ab_h, mass, mu)
            du = _solve_newton(ab_sys, -g)
            if np.all(np.isfinite(du)):
                dv, dr, dz = _deinterleave(du)
                cand = SymmetricMap.from_full(v + dv, r + dr, z + dz, m.z0)
                f2 = assemble_fields(cand, grid, target)
                e2 = energy_from_fields(f2, grid)
                _, _, _, tn2 = tension(cand, grid, target, f2)
                ok_descent = e2 <= e + 1e-12 * max(abs(e), 1.0)
                ok_tension = tn2 <= 0.5 * tn and e2 <= e + 1e-6 * max(abs(e), 1.0)
                if math.isfinite(e2) and (ok_descent or ok_tension):
                    m, e, tn = cand, float(e2), tn2
                    mu = max(mu / 3.0, 1e-9)
                    improved = True
                    break
            mu *= 10.0
            stale = True
            if mu > 1e14:
                break
        if not improved:
            tn_precise = tension_norm_precise(m, grid, target)
            if tn_precise <= tol:
                return m, grid, tn_precise, it
            raise InnerSolveFailure(
                f"harmonic relaxation stalled at tension {tn_precise:.3e} (target {tol:.1e})",
                last_tension=tn_precise)
    raise InnerSolveFailure(
        f"harmonic relaxation did not reach tol={tol:.1e} in {params.relax_max_steps} steps",
        last_tension=tn)


# ---------------------------------------------------------------------------
# coupled step (full flow) and metric step (rescaled flow)
# ---------------------------------------------------------------------------

def init_state(m: SymmetricMap, ell: float, params: FlowParams,
               target: TargetGeometry, stretch: StretchSpec | None = None) -> FlowState:
    grid = build_grid(m.n, CollarMetric(ell, "cylinder", params.d), stretch)
    f = assemble_fields(m, grid, target)
    e = energy_from_fields(f, grid)
    _, _, _, tn = tension(m, grid, target, f)
    _, b0 = hopf(m, grid, target, f)
    return FlowState(map=m, ell=ell, t=0.0, grid=grid, dt=params.dt_init,
                     energy=e, tension_norm=tn, b0=b0)


def step_full(state: FlowState, params: FlowParams, target: TargetGeometry) -> FlowState:
    """One accepted step of the coupled flow.

    Lie splitting, length first: explicit Euler on the length ODE with the
    current (relaxed) map, regrid, then an implicit map substep at the new
    length.  This ordering samples the run at post-relaxation states, where
    the tension norm carries the quasi-static lag rather than the jump just
    injected by the length update, so the recorded energy balance
    dE/dt = -|tau|^2 + (dE/dell) elldot closes pointwise.  The energy guard
    applies to the combined update.
    """
    grid = state.grid
    f = assemble_fields(state.map, grid, target)
    rate_pre, _ = length_ode_rhs(state.map, grid, target, params, f,
                                 quasi_static=state.tension_norm <= 1.0)

    dt = state.dt
    if rate_pre != 0.0:
        dt = min(dt, params.max_dlog_ell * state.ell / abs(rate_pre))
        dt = min(dt, params.max_rel_dell * state.ell / abs(rate_pre))
    dt = max(dt, params.dt_min)

    rejects_total = 0
    while True:
        dell = dt * rate_pre
        dell = max(min(dell, params.max_rel_dell * state.ell),
                   -params.max_rel_dell * state.ell)
        new_ell = state.ell + dell
        if new_ell <= 0.0:
            raise FlowError("length ODE produced nonpositive ell")
        new_grid = build_grid(state.map.n, CollarMetric(new_ell, "cylinder", params.d),
                              grid.stretch)

        new_map, dt_taken, dt_next, err, _, nrej = adaptive_map_step(
            state.map, new_grid, target, params, dt, state.err_prev,
            guard_energy=False)
        rejects_total += nrej
        if dt_taken == dt:
            f2 = assemble_fields(new_map, new_grid, target)
            e2 = energy_from_fields(f2, new_grid)
            if math.isfinite(e2) and e2 <= state.energy \
                    + params.energy_guard * max(state.energy, 1.0):
                break
        # either the inner controller shortened the map step (breaking the
        # splitting consistency) or the energy guard failed: retry shorter
        rejects_total += 1
        dt = min(dt, dt_taken) * 0.5
        if dt < params.dt_min:
            raise TimestepUnderflow("timestep underflow under the energy guard")

    _, _, _, tn2 = tension(new_map, new_grid, target, f2)
    _, b0b = hopf(new_map, new_grid, target, f2)
    return FlowState(map=new_map, ell=new_ell, t=state.t + dt_taken, grid=new_grid,
                     dt=dt_next, energy=e2, tension_norm=tn2, b0=b0b,
                     err_prev=err, n_accept=state.n_accept + 1,
                     n_reject=state.n_reject + rejects_total)


def step_rescaled(state: FlowState, params: FlowParams, target: TargetGeometry) -> FlowState:
    """One metric step of the rescaled flow: explicit ell update, re-relax."""
    if state.tension_norm > 10.0 * params.tol_inner:
        relaxed, grid, tn, _ = relax_harmonic(state.map, state.ell, target, params,
                                              grid=state.grid)
        state = replace(state, map=relaxed, tension_norm=tn)

    rate, b0 = length_ode_rhs(state.map, state.grid, target, params)
    if rate == 0.0:
        dt = min(1.0, max(params.t_max - state.t, 1e-9))
        new_ell = state.ell
    else:
        dt = params.max_dlog_ell * state.ell / abs(rate)
        new_ell = state.ell + dt * rate
    new_grid = build_grid(state.map.n, CollarMetric(new_ell, "cylinder", params.d),
                          state.grid.stretch)
    # warm start: arrays reinterpreted on the new node positions, then relaxed
    new_map, new_grid, tn, _ = relax_harmonic(state.map, new_ell, target, params,
                                              grid=new_grid)
    f = assemble_fields(new_map, new_grid, target)
    e = energy_from_fields(f, new_grid)
    _, b0b = hopf(new_map, new_grid, target, f)
    return FlowState(map=new_map, ell=new_ell, t=state.t + dt, grid=new_grid,
                     dt=state.dt, energy=e, tension_norm=tn, b0=b0b,
                     n_accept=state.n_accept + 1, n_reject=state.n_reject)
