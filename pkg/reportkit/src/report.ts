/** Build the per-run plot set and the combined markdown report.
 *
 * Every displayed number is read from the artifacts (series.csv,
 * summary.json, snapshots); nothing is recomputed from raw state, so the
 * report is a pure function of its inputs and re-running is idempotent.
 */

import * as fs from "node:fs";
import * as path from "node:path";

import { SeriesRow, latestSnapshot, parseSeries } from "./csv.js";
import { PlotSpec, renderPlot } from "./svg.js";

export interface Summary {
  schema_version: number;
  termination: string;
  fits: {
    available: boolean;
    delta_fit: number | null;
    log_rate_exponent: number | null;
    blowup_time_estimate: number | null;
    fit_window: [number, number] | null;
  };
  monitors: Record<string, unknown>;
  config: Record<string, unknown>;
  [k: string]: unknown;
}

export const SCHEMA_VERSION = 1;

export interface RunArtifacts {
  name: string;
  dir: string;
  series: SeriesRow[];
  summary: Summary;
}

export class SchemaError extends Error {}

export function loadRun(dir: string): RunArtifacts {
  const summary = JSON.parse(
    fs.readFileSync(path.join(dir, "summary.json"), "utf8"),
  ) as Summary;
  if (summary.schema_version !== SCHEMA_VERSION) {
    throw new SchemaError(
      `artifact schema v${summary.schema_version} but reader expects v${SCHEMA_VERSION}`,
    );
  }
  const series = parseSeries(fs.readFileSync(path.join(dir, "series.csv"), "utf8"));
  return { name: path.basename(dir), dir, series, summary };
}

function rateLogInv(r: SeriesRow): number {
  return -r.ell_rate / r.ell;
}

export function plotsForRun(run: RunArtifacts): Map<string, string> {
  const out = new Map<string, string>();
  const s = run.series;
  const t = s.map((r) => r.t);
  const mode = String(run.summary.config["mode"] ?? "full");

  out.set("ell_vs_t.svg", renderPlot({
    title: `${run.name}: central geodesic length`,
    xlabel: "t", ylabel: "ell", yscale: "log",
    curves: [{ x: t, y: s.map((r) => r.ell) }],
  }));

  out.set("log_ell_inv_vs_t.svg", renderPlot({
    title: `${run.name}: degeneration progress`,
    xlabel: "t", ylabel: "log(1/ell)",
    curves: [{ x: t, y: s.map((r) => Math.log(1 / r.ell)) }],
  }));

  const fits = run.summary.fits;
  const rescaled = mode === "rescaled";
  const slope = rescaled ? fits.log_rate_exponent : fits.delta_fit;
  const xs = s.map((r) =>
    rescaled ? Math.log(Math.log(1 / r.ell)) : Math.log(1 / r.ell));
  const ys = s.map((r) => (rateLogInv(r) > 0 ? Math.log(rateLogInv(r)) : NaN));
  const curves = [{ x: xs, y: ys, dots: true, label: "records" }];
  if (fits.available && slope !== null && Number.isFinite(slope)) {
    const ok = xs.filter((_, i) => Number.isFinite(ys[i]));
    const oky = ys.filter((y) => Number.isFinite(y));
    if (ok.length >= 2) {
      const x0 = Math.min(...ok);
      const x1 = Math.max(...ok);
      // anchor the displayed line through the mean of the fit window
      const mx = ok.reduce((a, b) => a + b, 0) / ok.length;
      const my = oky.reduce((a, b) => a + b, 0) / oky.length;
      curves.push({
        x: [x0, x1],
        y: [my + slope * (x0 - mx), my + slope * (x1 - mx)],
        dots: false,
        label: "fit",
      });
    }
  }
  out.set("rate_fit.svg", renderPlot({
    title: `${run.name}: rate fit (${rescaled ? "log-power" : "power"} model)`,
    xlabel: rescaled ? "log log(1/ell)" : "log(1/ell)",
    ylabel: "log(d/dt log(1/ell))",
    curves,
    annotations: [
      `fitted slope = ${slope === null ? "n/a" : String(slope)}`,
      `blow-up estimate = ${fits.blowup_time_estimate === null ? "n/a" : String(fits.blowup_time_estimate)}`,
    ],
  }));

  const snap = latestSnapshot(run.dir);
  out.set("profiles.svg", renderPlot({
    title: `${run.name}: Hopf and angular-energy profiles` + (snap?.t != null ? ` (t = ${snap.t})` : ""),
    xlabel: "s", ylabel: "profile value",
    curves: snap === null ? [] : [
      { x: snap.s, y: snap.psi, label: "psi" },
      { x: snap.s, y: snap.theta, label: "theta" },
    ],
  }));

  out.set("energy_balance.svg", renderPlot({
    title: `${run.name}: energy balance residual`,
    xlabel: "t", ylabel: "|dE/dt (FD) - model|", yscale: "log",
    curves: [{
      x: t.slice(1),
      y: s.slice(1).map((r) => Math.abs(r.dE_dt_fd - r.dE_dt_model)),
    }],
  }));

  out.set("monitors.svg", renderPlot({
    title: `${run.name}: monitor timeline`,
    xlabel: "t", ylabel: "flag",
    curves: [
      { x: t, y: s.map((r) => (r.thm1_i ? 1 : 0)), label: "thm1 (i)" },
      { x: t, y: s.map((r) => (r.thm1_ii === null ? 0.5 : r.thm1_ii ? 1 : 0)), label: "thm1 (ii)" },
      { x: t, y: s.map((r) => ({ bounded: 0, indeterminate: 0.5, stretching: 1 }[r.thm2_regime] ?? 0.5)), label: "thm2 regime" },
    ],
  }));

  return out;
}

export function overlayPlot(runs: RunArtifacts[]): string {
  return renderPlot({
    title: "central geodesic length, all runs",
    xlabel: "t", ylabel: "ell", yscale: "log",
    curves: runs.map((r) => ({
      x: r.series.map((row) => row.t),
      y: r.series.map((row) => row.ell),
      label: r.name,
    })),
  });
}

function mdTable(summary: Summary): string {
  const rows: [string, string][] = [
    ["termination", summary.termination],
    ["records", String(summary["n_records"] ?? "")],
    ["ell final", String(summary["ell_final"] ?? "")],
    ["energy initial", String(summary["energy_initial"] ?? "")],
    ["energy final", String(summary["energy_final"] ?? "")],
    ["delta_fit", String(summary.fits.delta_fit)],
    ["log_rate_exponent", String(summary.fits.log_rate_exponent)],
    ["blow-up estimate", String(summary.fits.blowup_time_estimate)],
  ];
  for (const [k, v] of Object.entries(summary.monitors)) {
    rows.push([`monitor: ${k}`, JSON.stringify(v)]);
  }
  return ["| field | value |", "| --- | --- |",
          ...rows.map(([k, v]) => `| ${k} | ${v} |`)].join("\n");
}

export function renderReport(runDirs: string[], outDir: string): string[] {
  fs.mkdirSync(outDir, { recursive: true });
  const runs = runDirs.map(loadRun);
  const written: string[] = [];
  const md: string[] = ["# collarflow run report", ""];
  for (const run of runs) {
    md.push(`## ${run.name}`, "");
    if (run.series.length === 0) {
      md.push("no data", "");
    }
    md.push(mdTable(run.summary), "");
    for (const [kind, svg] of plotsForRun(run)) {
      const fname = `${run.name}__${kind}`;
      fs.writeFileSync(path.join(outDir, fname), svg);
      written.push(fname);
      md.push(`![${fname}](${fname})`, "");
    }
  }
  if (runs.length > 1) {
    fs.writeFileSync(path.join(outDir, "combined__ell_overlay.svg"), overlayPlot(runs));
    written.push("combined__ell_overlay.svg");
    md.push("## combined", "", "![overlay](combined__ell_overlay.svg)", "");
  }
  fs.writeFileSync(path.join(outDir, "report.md"), md.join("\n"));
  written.push("report.md");
  return written;
}
