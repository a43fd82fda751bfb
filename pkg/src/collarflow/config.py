"""Flat key-value run configuration: parsing, validation, serialization.

Format: one ``section.key = value`` per line, ``#`` comments, blank lines
ignored.  Unknown keys, type mismatches and range violations are collected
with their line numbers and reported together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


@dataclass
class RunConfig:
    # mode
    mode: str = "full"                 # full | rescaled

    # target block
    target_c_n: float = 1e6
    target_kind: str = "poly"          # poly | exp | compact | const
    target_delta: float = 0.5
    target_alpha: float = 2.0 * math.pi
    target_c3: float = 3.8
    target_lambda: float = 49.0
    target_vbar: float = 0.0
    target_c4: float = 0.04            # compact coupling amplitude

    # flow block
    flow_eta: float = 1.0
    flow_d: float = 1.0
    flow_dt_init: float = 1e-3
    flow_dt_min: float = 1e-14
    flow_dt_max: float = 5.0
    flow_rtol: float = 1e-4
    flow_atol: float = 1e-7
    flow_tol_inner: float = 1e-7
    flow_ell_stop: float = 1e-4
    flow_t_max: float = 50.0
    flow_pre_relax_tension: float = 0.01
    flow_max_steps: int = 200_000

    # discretization block
    disc_n: int = 2048
    disc_gamma0: float = 64.0
    disc_band_lo: float = 0.30
    disc_band_hi: float = 0.85

    # initial-data block
    init_eps: float = 1e-3
    init_z0: float = 1.2
    init_energy_slack: float = 2.5
    init_ell0: float = 0.0             # 0 = solve from the budget

    # monitor block
    mon_eps0: float = 0.05
    mon_eps1: float = 1.0
    mon_c0: float = 1.0
    mon_delta: float = 0.5
    mon_ell_bar: float = 0.1
    mon_c1_upper: float = 8.0

    # output block
    out_record_every: int = 1
    out_snapshot_every: int = 0
    seed: int = 0

    def validate(self) -> list[str]:
        bad = []
        if self.mode not in ("full", "rescaled"):
            bad.append("mode: must be 'full' or 'rescaled'")
        if self.target_kind not in ("poly", "exp", "compact", "const"):
            bad.append("target.kind: unknown warping kind")
        if self.target_c_n <= 0:
            bad.append("target.c_n: must be positive")
        if self.target_kind == "poly" and not (0.0 < self.target_delta < 1.0):
            bad.append("target.delta: must lie in (0, 1)")
        for name, val in (("flow.eta", self.flow_eta), ("flow.d", self.flow_d),
                          ("flow.dt_min", self.flow_dt_min),
                          ("flow.tol_inner", self.flow_tol_inner),
                          ("flow.ell_stop", self.flow_ell_stop),
                          ("mon.eps0", self.mon_eps0), ("mon.eps1", self.mon_eps1),
                          ("mon.c0", self.mon_c0), ("mon.ell_bar", self.mon_ell_bar),
                          ("init.z0", self.init_z0 - 1.0),
                          ("init.energy_slack", self.init_energy_slack)):
            if val <= 0:
                bad.append(f"{name}: must be positive")
        if not (0.0 < self.init_eps < 0.125):
            bad.append("init.eps: must lie in (0, 1/8)")
        if self.disc_n < 16 or self.disc_n % 2:
            bad.append("disc.n: must be even and >= 16")
        if not (0.0 < self.disc_band_lo < self.disc_band_hi < 1.0):
            bad.append("disc.band_lo/band_hi: need 0 < lo < hi < 1")
        if self.flow_t_max < 0:
            bad.append("flow.t_max: must be nonnegative")
        if self.target_kind == "const" and self.init_ell0 <= 0:
            bad.append("init.ell0: required (positive) for the product target")
        return bad


_KEYMAP = {
    "mode": ("mode", str),
    "target.c_n": ("target_c_n", float),
    "target.kind": ("target_kind", str),
    "target.delta": ("target_delta", float),
    "target.alpha": ("target_alpha", float),
    "target.c3": ("target_c3", float),
    "target.lambda": ("target_lambda", float),
    "target.vbar": ("target_vbar", float),
    "target.c4": ("target_c4", float),
    "flow.eta": ("flow_eta", float),
    "flow.d": ("flow_d", float),
    "flow.dt_init": ("flow_dt_init", float),
    "flow.dt_min": ("flow_dt_min", float),
    "flow.dt_max": ("flow_dt_max", float),
    "flow.rtol": ("flow_rtol", float),
    "flow.atol": ("flow_atol", float),
    "flow.tol_inner": ("flow_tol_inner", float),
    "flow.ell_stop": ("flow_ell_stop", float),
    "flow.t_max": ("flow_t_max", float),
    "flow.pre_relax_tension": ("flow_pre_relax_tension", float),
    "flow.max_steps": ("flow_max_steps", int),
    "disc.n": ("disc_n", int),
    "disc.gamma0": ("disc_gamma0", float),
    "disc.band_lo": ("disc_band_lo", float),
    "disc.band_hi": ("disc_band_hi", float),
    "init.eps": ("init_eps", float),
    "init.z0": ("init_z0", float),
    "init.energy_slack": ("init_energy_slack", float),
    "init.ell0": ("init_ell0", float),
    "mon.eps0": ("mon_eps0", float),
    "mon.eps1": ("mon_eps1", float),
    "mon.c0": ("mon_c0", float),
    "mon.delta": ("mon_delta", float),
    "mon.ell_bar": ("mon_ell_bar", float),
    "mon.c1_upper": ("mon_c1_upper", float),
    "out.record_every": ("out_record_every", int),
    "out.snapshot_every": ("out_snapshot_every", int),
    "seed": ("seed", int),
}


def parse_config(text: str) -> RunConfig:
    """Parse the flat format; raises ConfigError listing every violation."""
    cfg = RunConfig()
    violations = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            violations.append(f"line {lineno}: expected 'section.key = value'")
            continue
        key, _, val = (p.strip() for p in line.partition("="))
        if key not in _KEYMAP:
            violations.append(f"line {lineno}: unknown key {key!r}")
            continue
        attr, typ = _KEYMAP[key]
        try:
            setattr(cfg, attr, typ(val) if typ is not str else val)
        except ValueError:
            violations.append(f"line {lineno}: cannot parse {val!r} as {typ.__name__}")
    violations.extend(cfg.validate())
    if violations:
        raise ConfigError(violations)
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    lines = [f"# collarflow run configuration (schema v{SCHEMA_VERSION})"]
    attr_to_key = {attr: key for key, (attr, _) in _KEYMAP.items()}
    for f in fields(cfg):
        key = attr_to_key[f.name]
        val = getattr(cfg, f.name)
        lines.append(f"{key} = {val}")
    return "\n".join(lines) + "\n"


def config_to_dict(cfg: RunConfig) -> dict:
    attr_to_key = {attr: key for key, (attr, _) in _KEYMAP.items()}
    return {attr_to_key[f.name]: getattr(cfg, f.name) for f in fields(cfg)}
