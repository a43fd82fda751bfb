/** Parsing for the run artifacts: series.csv and snapshot tables. */

import * as fs from "node:fs";
import * as path from "node:path";

export interface SeriesRow {
  t: number;
  ell: number;
  E: number;
  psi_mean: number;
  psi_std: number;
  b0: number;
  L_leash: number;
  v_max: number;
  tension_norm: number;
  dE_dt_fd: number;
  dE_dt_model: number;
  thm1_i: boolean;
  thm1_ii: boolean | null;
  thm2_regime: string;
  dE_dl: number;
  ell_rate: number;
}

const NUMERIC: (keyof SeriesRow)[] = [
  "t", "ell", "E", "psi_mean", "psi_std", "b0", "L_leash", "v_max",
  "tension_norm", "dE_dt_fd", "dE_dt_model", "dE_dl", "ell_rate",
];

export function splitCsvLine(line: string): string[] {
  return line.split(",").map((s) => s.trim());
}

export function parseSeries(text: string): SeriesRow[] {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) return [];
  const header = splitCsvLine(lines[0]);
  const idx = new Map(header.map((h, i) => [h, i]));
  const rows: SeriesRow[] = [];
  for (const line of lines.slice(1)) {
    const cells = splitCsvLine(line);
    const row: Partial<SeriesRow> = {};
    for (const key of NUMERIC) {
      const j = idx.get(key);
      (row as Record<string, unknown>)[key] = j === undefined ? NaN : Number(cells[j]);
    }
    const t1 = cells[idx.get("thm1_i") ?? -1];
    const t2 = cells[idx.get("thm1_ii") ?? -1];
    row.thm1_i = t1 === "true";
    row.thm1_ii = t2 === "n/a" || t2 === undefined ? null : t2 === "true";
    row.thm2_regime = cells[idx.get("thm2_regime") ?? -1] ?? "indeterminate";
    rows.push(row as SeriesRow);
  }
  return rows;
}

export interface Snapshot {
  t: number | null;
  s: number[];
  psi: number[];
  theta: number[];
}

export function parseSnapshot(text: string): Snapshot {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  const header = splitCsvLine(lines[0] ?? "");
  const si = header.indexOf("s");
  const pi = header.indexOf("psi");
  const ti = header.indexOf("theta");
  const out: Snapshot = { t: null, s: [], psi: [], theta: [] };
  for (const line of lines.slice(1)) {
    if (line.startsWith("#") || line.startsWith("\"#")) {
      const m = line.match(/t = ([-0-9.eE+]+)/);
      if (m) out.t = Number(m[1]);
      continue;
    }
    const cells = splitCsvLine(line);
    out.s.push(Number(cells[si]));
    out.psi.push(Number(cells[pi]));
    out.theta.push(Number(cells[ti]));
  }
  return out;
}

export function latestSnapshot(runDir: string): Snapshot | null {
  const snaps = fs
    .readdirSync(runDir)
    .filter((f) => /^snap_\d+\.csv$/.test(f))
    .sort();
  if (snaps.length === 0) return null;
  return parseSnapshot(fs.readFileSync(path.join(runDir, snaps[snaps.length - 1]), "utf8"));
}
