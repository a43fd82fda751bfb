"""Command-line entry point: run configs and sweeps, emit CSV + JSON artifacts.

Artifacts per run directory:
  series.csv    one row per diagnostics record (strictly time-ordered)
  summary.json  termination cause, fitted rates, monitor aggregates, config
  snap_*.csv    optional state snapshots (xi, s, v, r, z, psi, theta)
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import SCHEMA_VERSION, ConfigError, RunConfig, config_to_dict, parse_config
from .flow import FlowParams
from .grid import StretchSpec
from .initial import InitialDataSpec, build_initial
from .monitors import MonitorConfig
from .runner import RunResult, run_flow
from .target import TargetGeometry, build_compact_coupling, make_warping

CSV_HEADER = ["t", "ell", "E", "psi_mean", "psi_std", "b0", "L_leash", "v_max",
              "tension_norm", "dE_dt_fd", "dE_dt_model", "thm1_i", "thm1_ii",
              "thm2_regime"]

EXTRA_HEADER = ["X", "ell_rate", "dE_dl", "central_energy", "v_center_min",
                "area_w", "disjoint", "thm1_margin"]


def build_objects(cfg: RunConfig):
    if cfg.target_kind == "compact":
        warping = build_compact_coupling(cfg.target_c4, vbar=cfg.target_vbar).as_warping()
    else:
        warping = make_warping(cfg.target_kind, vbar=cfg.target_vbar,
                               delta=cfg.target_delta, alpha=cfg.target_alpha,
                               c3=cfg.target_c3, lam=cfg.target_lambda)
    certify = cfg.target_kind != "const"
    target = TargetGeometry.build(cfg.target_c_n, warping, z0=cfg.init_z0,
                                  certify=certify)
    params = FlowParams(
        eta=cfg.flow_eta, d=cfg.flow_d, mode=cfg.mode, dt_init=cfg.flow_dt_init,
        dt_min=cfg.flow_dt_min, dt_max=cfg.flow_dt_max, rtol=cfg.flow_rtol,
        atol=cfg.flow_atol, tol_inner=cfg.flow_tol_inner,
        ell_stop=cfg.flow_ell_stop, t_max=cfg.flow_t_max,
        pre_relax_tension=cfg.flow_pre_relax_tension, eps0=cfg.mon_eps0)
    mon = MonitorConfig(eps0=cfg.mon_eps0, eps1=cfg.mon_eps1, c0=cfg.mon_c0,
                        delta=cfg.mon_delta, ell_bar=cfg.mon_ell_bar,
                        c1_upper=cfg.mon_c1_upper)
    stretch = StretchSpec(gamma0=cfg.disc_gamma0, band_lo=cfg.disc_band_lo,
                          band_hi=cfg.disc_band_hi)
    spec = InitialDataSpec(eps=cfg.init_eps, z0=cfg.init_z0,
                           energy_slack=cfg.init_energy_slack)
    return target, params, mon, stretch, spec


def execute(cfg: RunConfig, outdir: Path) -> RunResult:
    """Run a validated config and write the artifact set."""
    target, params, mon, stretch, spec = build_objects(cfg)
    ell0 = cfg.init_ell0 if cfg.init_ell0 > 0 else None
    m0, ell0, _, budget = build_initial(spec, target, n=cfg.disc_n, d=cfg.flow_d,
                                        ell0=ell0, stretch=stretch)
    result = run_flow(m0, ell0, target, params, mon, stretch=stretch,
                      record_every=cfg.out_record_every,
                      snapshot_every=cfg.out_snapshot_every,
                      max_steps=cfg.flow_max_steps)
    outdir.mkdir(parents=True, exist_ok=True)
    write_series(result, outdir / "series.csv")
    write_summary(result, cfg, budget, ell0, outdir / "summary.json")
    for k, (t, table) in enumerate(result.snapshots):
        write_snapshot(t, table, outdir / f"snap_{k:04d}.csv")
    return result


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if x is None:
        return "n/a"
    if isinstance(x, float):
        # the only legitimately undefined record field is the first row's
        # backward difference; everything else aborts upstream
        return "n/a" if math.isnan(x) else f"{x:.12g}"
    return str(x)


def write_series(result: RunResult, path: Path) -> None:
    rows = []
    for r in result.records:
        if any(isinstance(v, float) and math.isnan(v)
               for v in (r.ell, r.energy, r.b0, r.leash, r.v_max, r.tension_norm)):
            raise ArithmeticError("numeric failure: NaN in emitted record")
        rows.append([_fmt(x) for x in (
            r.t, r.ell, r.energy, r.psi_mean, r.psi_std, r.b0, r.leash, r.v_max,
            r.tension_norm, r.dE_dt_fd, r.dE_dt_model, r.thm1_i, r.thm1_ii,
            r.thm2_regime, r.X, r.ell_rate, r.dE_dl, r.central_energy,
            r.v_center_min, r.area_w, r.disjoint, r.thm1_margin)])
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_HEADER + EXTRA_HEADER)
        wr.writerows(rows)


def _jsonable(obj):
    """Strict-JSON values: non-finite floats become null."""
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_summary(result: RunResult, cfg: RunConfig, budget: dict, ell0: float,
                  path: Path) -> None:
    recs = result.records
    margins = [r.thm1_margin for r in recs if r.thm1_ii is not None]
    gated = [r for r in recs if r.thm1_ii is not None]
    chain_recs = [r for r in recs if r.chain.get("applicable")]
    summary = {
        "schema_version": SCHEMA_VERSION,
        "termination": result.termination,
        "ell0": ell0,
        "ell_final": recs[-1].ell,
        "t_final": recs[-1].t,
        "energy_initial": recs[0].energy,
        "energy_final": recs[-1].energy,
        "n_records": len(recs),
        "fits": result.fits,
        "budget": budget,
        "monitors": {
            "thm1_hyp_i_all": all(r.thm1_i for r in recs),
            "thm1_hyp_ii_gated_all": all(r.thm1_ii for r in gated) if gated else None,
            "thm1_margin_min": min(margins) if margins else None,
            "thm2_regimes": sorted({r.thm2_regime for r in recs}),
            "disjoint_all": all(r.disjoint for r in recs),
            "area_w_min": min(r.area_w for r in recs),
            "central_energy_min": min((r.chain["central_energy"] for r in chain_recs),
                                      default=None),
            "v_center_ok_all": all(r.chain["v_center_ok"] for r in chain_recs)
            if chain_recs else None,
            "ell_bound_ok_all": all(r.chain["ell_bound_ok"] for r in chain_recs)
            if chain_recs else None,
            "vmax_rate_constant_min": min((r.chain["vmax_rate_constant"]
                                           for r in chain_recs), default=None),
            "region_violations_total": sum(len(r.region_violations) for r in recs),
            "energy_monotone": bool(np.all(np.diff([r.energy for r in recs])
                                           <= 1e-8 * max(recs[0].energy, 1.0))),
        },
        "config": config_to_dict(cfg),
    }
    with open(path, "w") as fh:
        json.dump(_jsonable(summary), fh, indent=2, allow_nan=False)
        fh.write("\n")


def write_snapshot(t: float, table: np.ndarray, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["xi", "s", "v", "r", "z", "psi", "theta"])
        wr.writerow([f"# t = {t!r}"])
        for row in table:
            wr.writerow([f"{x:.12g}" for x in row])


def _sweep_blocks(text: str) -> list[str]:
    blocks, cur = [], []
    for line in text.splitlines():
        if line.strip() == "---":
            if cur:
                blocks.append("\n".join(cur))
                cur = []
        else:
            cur.append(line)
    if cur and any(l.split("#")[0].strip() for l in cur):
        blocks.append("\n".join(cur))
    return blocks


def _run_sweep_entry(args):
    base_text, overrides, outdir = args
    cfg = parse_config(base_text + "\n" + overrides)
    execute(cfg, Path(outdir))
    return outdir


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="collarflow")
    sub = ap.add_subparsers(dest="command", required=True)
    runp = sub.add_parser("run", help="run a configuration")
    runp.add_argument("config", help="path to the flat key-value config")
    runp.add_argument("--out", default="runs/out", help="output directory")
    runp.add_argument("--validate-only", action="store_true")
    runp.add_argument("--sweep", default=None,
                      help="file of override blocks separated by '---' lines")
    runp.add_argument("--workers", type=int, default=2)
    args = ap.parse_args(argv)

    text = Path(args.config).read_text()
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return 2
    if args.validate_only:
        print("config ok")
        return 0

    if args.sweep:
        blocks = _sweep_blocks(Path(args.sweep).read_text())
        jobs = [(text, blk, str(Path(args.out) / f"run_{i:03d}"))
                for i, blk in enumerate(blocks)]
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            for done in pool.map(_run_sweep_entry, jobs):
                print(f"finished {done}")
        return 0

    try:
        result = execute(cfg, Path(args.out))
    except Exception as exc:
        err = {"error": type(exc).__name__, "message": str(exc)}
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "error.json").write_text(json.dumps(err, indent=2))
        print(json.dumps(err), file=sys.stderr)
        return 1
    print(f"terminated: {result.termination}; ell = {result.records[-1].ell:.4e}; "
          f"records = {len(result.records)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
