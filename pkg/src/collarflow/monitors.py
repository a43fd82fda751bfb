"""Hypothesis monitors and bound checks evaluated along runs.

Monitors are pure functions of a diagnostics record (plus static config)
and never mutate run state.  Gated hypotheses report "n/a" as a first-class
outcome rather than silently passing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MonitorConfig:
    eps0: float = 0.05        # low-energy window threshold
    eps1: float = 1.0         # tension gate for the stretching hypothesis
    c0: float = 1.0           # stretching-rate constant
    delta: float = 0.5
    ell_bar: float = 0.1      # smallness threshold (observed, tunable)
    e0: float = 10.0 * math.pi
    c1_upper: float = 8.0     # bounded-regime constant (Theorem 2 (i) side)

    def __post_init__(self):
        if min(self.eps0, self.eps1, self.c0, self.ell_bar, self.e0) <= 0:
            raise ValueError("monitor constants must be positive")
        if not 0.0 < self.delta:
            raise ValueError("delta must be positive")


def thm1_monitor(record, config: MonitorConfig) -> dict:
    """Hypotheses of the finite-time degeneration criterion for the full flow.

    hyp_i: ell below the smallness threshold.  hyp_ii (gated on the tension
    norm): leash length at least c0 ell^{-(1+delta)/4}.  The margin is the
    empirical c0 = L / ell^{-(1+delta)/4}.
    """
    hyp_i = record.ell <= config.ell_bar
    scale = record.ell ** (-(1.0 + config.delta) / 4.0)
    if record.tension_norm <= config.eps1:
        hyp_ii = bool(record.leash >= config.c0 * scale)
        margin = record.leash / scale
    else:
        hyp_ii, margin = None, float("nan")
    return {"hyp_i": bool(hyp_i), "hyp_ii": hyp_ii, "margin": margin}


def thm2_monitor(record, config: MonitorConfig) -> dict:
    """Bounded / stretching dichotomy of the rescaled flow.

    bounded:    L <= C1 log(1/ell)^{1/2}
    stretching: L >= c0 log(1/ell)^{(1+delta)/2}
    """
    loginv = math.log(1.0 / record.ell)
    if loginv <= 1.0:
        return {"regime": "indeterminate", "ratio_bounded": float("nan"),
                "ratio_stretching": float("nan")}
    rb = record.leash / loginv ** 0.5
    rs = record.leash / loginv ** (0.5 * (1.0 + config.delta))
    if rs >= config.c0:
        regime = "stretching"
    elif rb <= config.c1_upper:
        regime = "bounded"
    else:
        regime = "indeterminate"
    return {"regime": regime, "ratio_bounded": rb, "ratio_stretching": rs}


def lemma31_check(record, config: MonitorConfig, tol_inner: float) -> dict:
    """Hopf-constant bounds for harmonic states.

    upper: psi / (ell^2 (log(1/ell) + 1)) stays bounded;
    lower: psi / (ell^2 log(1/ell)^{1+delta}) stays positive.
    Ratios are reported; boundedness is judged across the run.  n/a when
    the record is not harmonic to the inner tolerance.
    """
    if record.tension_norm > 10.0 * tol_inner:
        return {"upper_ratio": float("nan"), "lower_ratio": float("nan"), "gated": False}
    loginv = math.log(1.0 / record.ell)
    psi = record.psi_mean
    upper = psi / (record.ell**2 * (loginv + 1.0))
    lower = psi / (record.ell**2 * loginv ** (1.0 + config.delta)) if loginv > 0 else float("nan")
    return {"upper_ratio": upper, "lower_ratio": lower, "gated": True}


def lemma45_46_chain(record, config: MonitorConfig, vbar: float,
                     warping_kind: str) -> dict:
    """Per-record checks of the central-region chain.

    (a) ell <= 5 pi^2 / vbar^2 (vacuous for vbar = 0);
    (b) central w-energy >= 2 pi, evaluated when X >= 8;
    (c) min v over |s| <= 8 at least vbar + 1;
    (d) the stretching rate of v_max: v_max ell^{(1+delta)/4} (poly) or
        v_max / log(1/ell) (exp family) as the fitted-constant channel.
    """
    if record.X < 8.0:
        return {"applicable": False}
    out = {"applicable": True}
    out["ell_bound_ok"] = bool(record.ell <= 5.0 * math.pi**2 / vbar**2) if vbar > 0 else True
    out["central_energy"] = record.central_energy
    out["central_energy_ok"] = bool(record.central_energy >= 2.0 * math.pi)
    out["v_center_min"] = record.v_center_min
    out["v_center_ok"] = bool(record.v_center_min >= vbar + 1.0)
    if warping_kind == "poly":
        out["vmax_rate_constant"] = record.v_max * record.ell ** ((1.0 + config.delta) / 4.0)
    else:
        loginv = math.log(1.0 / record.ell)
        out["vmax_rate_constant"] = record.v_max / loginv if loginv > 0 else float("nan")
    return out


def lemma24_structure(components, e0: float, eps0: float, rho_max: float) -> list[str]:
    """Structural bounds on the connected components of the complement of B.

    Returns human-readable violations (empty list = all hold): component
    count at most E0/eps0 + 2; length of each component controlled by the
    local conformal factor; conformal factor comparable within a component.
    """
    bad = []
    if len(components) > e0 / eps0 + 2:
        bad.append(f"component count {len(components)} exceeds E0/eps0 + 2")
    cbound = 8.0 * (e0 / eps0 + 2.0)
    for (lo, hi, length, sup_rho, inf_rho) in components:
        if length > cbound * (max(math.log(1.0 / inf_rho), 0.0) + 1.0) + 1e-9:
            bad.append(f"component ({lo:.1f},{hi:.1f}) longer than the log bound")
        if sup_rho > math.exp(min(rho_max * length, 700.0)) * inf_rho * (1 + 1e-9):
            bad.append(f"component ({lo:.1f},{hi:.1f}) violates rho-comparability")
    return bad
