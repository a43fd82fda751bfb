import csv
import json
import math
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from collarflow.cli import execute, main
from collarflow.config import (
    ConfigError,
    RunConfig,
    config_to_dict,
    parse_config,
    serialize_config,
)

FAST_OVERRIDES = """
mode = rescaled
target.kind = const
init.ell0 = 0.05
flow.t_max = 0.5
disc.n = 256
"""


def test_empty_text_gives_defaults():
    cfg = parse_config("")
    assert cfg == RunConfig()


def test_parse_values_and_comments():
    cfg = parse_config("""
# comment
flow.eta = 0.25   # trailing comment
target.kind = exp
disc.n = 512
""")
    assert cfg.flow_eta == 0.25
    assert cfg.target_kind == "exp"
    assert cfg.disc_n == 512


def test_unknown_key_with_line_number():
    with pytest.raises(ConfigError) as exc:
        parse_config("flow.eta = 1.0\nbogus.key = 3\n")
    assert any("line 2" in v and "bogus.key" in v for v in exc.value.violations)


def test_range_violation_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config("flow.eta = -1\n")
    assert any("flow.eta" in v for v in exc.value.violations)


def test_type_mismatch_reported():
    with pytest.raises(ConfigError) as exc:
        parse_config("disc.n = two\n")
    assert any("line 1" in v for v in exc.value.violations)


def test_multiple_violations_collected():
    with pytest.raises(ConfigError) as exc:
        parse_config("flow.eta = -1\nmon.eps0 = -2\nnope = 1\n")
    assert len(exc.value.violations) >= 3


def test_roundtrip_serialization():
    cfg = parse_config("flow.eta = 0.125\ntarget.kind = exp\nmon.delta = 0.75\n")
    text = serialize_config(cfg)
    cfg2 = parse_config(text)
    assert cfg2 == cfg
    assert config_to_dict(cfg2) == config_to_dict(cfg)


@settings(max_examples=20, deadline=None)
@given(eta=st.floats(1e-3, 10.0), n=st.sampled_from([64, 256, 2048]),
       kind=st.sampled_from(["poly", "exp", "const"]))
def test_roundtrip_property(eta, n, kind):
    cfg = RunConfig(flow_eta=eta, disc_n=n, target_kind=kind,
                    init_ell0=0.05 if kind == "const" else 0.0)
    assert parse_config(serialize_config(cfg)) == cfg


def test_product_requires_ell0():
    with pytest.raises(ConfigError):
        parse_config("target.kind = const\n")


# ---------------------------------------------------------------------------
# execution artifacts
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def fast_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("fastrun")
    cfg = parse_config(FAST_OVERRIDES)
    result = execute(cfg, out)
    return cfg, out, result


def test_execute_writes_artifacts(fast_run):
    _, out, result = fast_run
    assert (out / "series.csv").exists()
    assert (out / "summary.json").exists()
    rows = list(csv.DictReader(open(out / "series.csv")))
    assert len(rows) == len(result.records)
    header = open(out / "series.csv").readline().strip().split(",")
    assert header[:14] == ["t", "ell", "E", "psi_mean", "psi_std", "b0", "L_leash",
                           "v_max", "tension_norm", "dE_dt_fd", "dE_dt_model",
                           "thm1_i", "thm1_ii", "thm2_regime"]
    ts = [float(r["t"]) for r in rows]
    assert all(b > a for a, b in zip(ts, ts[1:]))


def test_summary_schema(fast_run):
    _, out, _ = fast_run
    summ = json.load(open(out / "summary.json"))
    assert summ["schema_version"] == 1
    for key in ("termination", "fits", "monitors", "config", "budget"):
        assert key in summ
    assert summ["config"]["disc.n"] == 256


def test_execute_deterministic(fast_run, tmp_path):
    cfg, out, _ = fast_run
    execute(cfg, tmp_path / "again")
    a = (out / "series.csv").read_text()
    b = (tmp_path / "again" / "series.csv").read_text()
    assert a == b


def test_cli_validate_only(tmp_path, capsys):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text(FAST_OVERRIDES)
    assert main(["run", str(cfgfile), "--validate-only"]) == 0
    cfgfile.write_text("flow.eta = -1\n")
    assert main(["run", str(cfgfile), "--validate-only"]) == 2


def test_cli_run_and_snapshots(tmp_path):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text(FAST_OVERRIDES + "out.snapshot_every = 1\n")
    assert main(["run", str(cfgfile), "--out", str(tmp_path / "out")]) == 0
    snaps = sorted((tmp_path / "out").glob("snap_*.csv"))
    assert snaps
    header = open(snaps[0]).readline().strip().split(",")
    assert header == ["xi", "s", "v", "r", "z", "psi", "theta"]


def test_cli_sweep(tmp_path):
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text(FAST_OVERRIDES)
    sweep = tmp_path / "sweep.txt"
    sweep.write_text("flow.t_max = 0.2\n---\nflow.t_max = 0.3\n")
    assert main(["run", str(cfgfile), "--out", str(tmp_path / "sw"),
                 "--sweep", str(sweep), "--workers", "2"]) == 0
    assert (tmp_path / "sw" / "run_000" / "summary.json").exists()
    assert (tmp_path / "sw" / "run_001" / "summary.json").exists()
    t0 = json.load(open(tmp_path / "sw" / "run_000" / "summary.json"))["config"]["flow.t_max"]
    t1 = json.load(open(tmp_path / "sw" / "run_001" / "summary.json"))["config"]["flow.t_max"]
    assert (t0, t1) == (0.2, 0.3)


def test_poly_reference_config_deterministic(tmp_path):
    # golden-style check: the checked-in degenerating configuration replays
    # byte-identically (short horizon, reduced grid)
    text = (Path(__file__).resolve().parent.parent / "configs" / "poly_full.cfg").read_text()
    cfg = parse_config(text + "\ndisc.n = 1024\nflow.t_max = 0.5\nout.snapshot_every = 50\n")
    a, b = tmp_path / "a", tmp_path / "b"
    execute(cfg, a)
    execute(cfg, b)
    assert (a / "series.csv").read_bytes() == (b / "series.csv").read_bytes()
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    snaps_a = sorted(p.name for p in a.glob("snap_*.csv"))
    assert snaps_a == sorted(p.name for p in b.glob("snap_*.csv"))
    for name in snaps_a:
        assert (a / name).read_bytes() == (b / name).read_bytes()
