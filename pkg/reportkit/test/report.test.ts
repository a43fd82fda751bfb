import * as fs from "node:fs";
import * as os from "node:os";
import * as path from "node:path";

import { beforeAll, describe, expect, it } from "vitest";

import { parseSeries, parseSnapshot } from "../src/csv.js";
import { renderPlot } from "../src/svg.js";
import { SCHEMA_VERSION, loadRun, plotsForRun, renderReport } from "../src/report.js";

const HEADER =
  "t,ell,E,psi_mean,psi_std,b0,L_leash,v_max,tension_norm,dE_dt_fd,dE_dt_model," +
  "thm1_i,thm1_ii,thm2_regime,X,ell_rate,dE_dl,central_energy,v_center_min," +
  "area_w,disjoint,thm1_margin";

function makeRun(dir: string, rows: string[], summary: Record<string, unknown>): void {
  fs.mkdirSync(dir, { recursive: true });
  fs.writeFileSync(path.join(dir, "series.csv"), [HEADER, ...rows].join("\n") + "\n");
  fs.writeFileSync(path.join(dir, "summary.json"), JSON.stringify(summary));
}

function syntheticRun(dir: string, n = 40): Record<string, unknown> {
  const rows: string[] = [];
  for (let k = 0; k < n; k++) {
    const t = k * 0.1;
    const ell = 1e-2 * Math.exp(-0.5 * t);
    const rate = -0.5 * ell;
    rows.push(
      [t, ell, 30 - 0.1 * t, 1e-4, 1e-8, 1.6e-5, 110, 50, 0.01, -0.1, -0.1,
       "true", k % 2 ? "true" : "n/a", "stretching", 9.87 / ell, rate, 2.0,
       10.0, 9.0, 12.4, "true", 8.2].join(","),
    );
  }
  const summary = {
    schema_version: SCHEMA_VERSION,
    termination: "ell_stop reached",
    n_records: n,
    ell_final: 1e-4,
    energy_initial: 30.0,
    energy_final: 28.0,
    fits: {
      available: true,
      delta_fit: 0.8622268770746907,
      log_rate_exponent: 1.23,
      blowup_time_estimate: 136.5,
      fit_window: [1e-4, 1e-3],
    },
    monitors: { disjoint_all: true },
    config: { mode: "full", "disc.n": 2048 },
  };
  makeRun(dir, rows, summary);
  return summary;
}

let tmp: string;

beforeAll(() => {
  tmp = fs.mkdtempSync(path.join(os.tmpdir(), "reportkit-"));
});

describe("csv parsing", () => {
  it("parses series rows with gated booleans", () => {
    const rows = parseSeries(
      [HEADER,
       "0,0.01,30,1e-4,1e-8,1.6e-5,110,50,0.01,nan,-0.1,true,n/a,stretching," +
       "987,-0.005,2.0,10,9,12.4,true,8.2"].join("\n"),
    );
    expect(rows).toHaveLength(1);
    expect(rows[0].ell).toBe(0.01);
    expect(rows[0].thm1_i).toBe(true);
    expect(rows[0].thm1_ii).toBeNull();
    expect(Number.isNaN(rows[0].dE_dt_fd)).toBe(true);
  });

  it("parses snapshots with the time comment", () => {
    const snap = parseSnapshot(
      "xi,s,v,r,z,psi,theta\n\"# t = 1.5\"\n0,0,1,0.5,0,1e-4,0.2\n0.5,10,2,0.4,1,1e-4,0.1\n",
    );
    expect(snap.t).toBe(1.5);
    expect(snap.s).toEqual([0, 10]);
    expect(snap.theta[1]).toBe(0.1);
  });
});

describe("svg rendering", () => {
  it("renders axes, curves and annotations", () => {
    const svg = renderPlot({
      title: "demo", xlabel: "x", ylabel: "y",
      curves: [{ x: [0, 1, 2], y: [1, 2, 4], label: "c" }],
      annotations: ["slope = 2"],
    });
    expect(svg).toContain("<svg");
    expect(svg).toContain("slope = 2");
    expect(svg).toContain("<path");
  });

  it("log scale drops nonpositive values and never emits NaN", () => {
    const svg = renderPlot({
      title: "log", xlabel: "x", ylabel: "y", yscale: "log",
      curves: [{ x: [1, 2, 3], y: [0, -1, 10] }],
    });
    expect(svg).not.toContain("NaN");
  });

  it("empty data yields a placeholder", () => {
    const svg = renderPlot({ title: "none", xlabel: "x", ylabel: "y", curves: [] });
    expect(svg).toContain("no data");
  });
});

describe("report generation", () => {
  it("writes the full plot set plus markdown", () => {
    const run = path.join(tmp, "runA");
    syntheticRun(run);
    const out = path.join(tmp, "outA");
    const written = renderReport([run], out);
    for (const kind of ["ell_vs_t.svg", "log_ell_inv_vs_t.svg", "rate_fit.svg",
                        "profiles.svg", "energy_balance.svg", "monitors.svg"]) {
      expect(written).toContain(`runA__${kind}`);
    }
    expect(fs.existsSync(path.join(out, "report.md"))).toBe(true);
  });

  it("annotates the fitted slope with the exact summary.json value", () => {
    const run = path.join(tmp, "runB");
    const summary = syntheticRun(run);
    const out = path.join(tmp, "outB");
    renderReport([run], out);
    const svg = fs.readFileSync(path.join(out, "runB__rate_fit.svg"), "utf8");
    const fits = summary.fits as { delta_fit: number };
    expect(svg).toContain(`fitted slope = ${fits.delta_fit}`);
    const md = fs.readFileSync(path.join(out, "report.md"), "utf8");
    expect(md).toContain(String(fits.delta_fit));
  });

  it("is idempotent and does not modify inputs", () => {
    const run = path.join(tmp, "runC");
    syntheticRun(run);
    const before = fs.readFileSync(path.join(run, "series.csv"), "utf8");
    const out = path.join(tmp, "outC");
    renderReport([run], out);
    const first = fs.readFileSync(path.join(out, "runC__rate_fit.svg"), "utf8");
    renderReport([run], out);
    const second = fs.readFileSync(path.join(out, "runC__rate_fit.svg"), "utf8");
    expect(second).toBe(first);
    expect(fs.readFileSync(path.join(run, "series.csv"), "utf8")).toBe(before);
  });

  it("renders a multi-run overlay", () => {
    const r1 = path.join(tmp, "runD");
    const r2 = path.join(tmp, "runE");
    syntheticRun(r1);
    syntheticRun(r2);
    const out = path.join(tmp, "outD");
    const written = renderReport([r1, r2], out);
    expect(written).toContain("combined__ell_overlay.svg");
    const svg = fs.readFileSync(path.join(out, "combined__ell_overlay.svg"), "utf8");
    expect(svg).toContain("runD");
    expect(svg).toContain("runE");
  });

  it("handles an empty series with placeholders and exit-free flow", () => {
    const run = path.join(tmp, "runF");
    makeRun(run, [], {
      schema_version: SCHEMA_VERSION, termination: "t_max reached",
      fits: { available: false, delta_fit: null, log_rate_exponent: null,
              blowup_time_estimate: null, fit_window: null },
      monitors: {}, config: { mode: "full" },
    });
    const out = path.join(tmp, "outF");
    const written = renderReport([run], out);
    expect(written).toContain("report.md");
    const svg = fs.readFileSync(path.join(out, "runF__ell_vs_t.svg"), "utf8");
    expect(svg).toContain("no data");
  });

  it("rejects mismatched schema versions", () => {
    const run = path.join(tmp, "runG");
    makeRun(run, [], {
      schema_version: 999, termination: "x",
      fits: { available: false, delta_fit: null, log_rate_exponent: null,
              blowup_time_estimate: null, fit_window: null },
      monitors: {}, config: {},
    });
    expect(() => loadRun(run)).toThrowError(/schema/);
  });
});
