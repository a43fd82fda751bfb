/** Minimal deterministic SVG line plots: linear/log scales, ticks, legend. */

export type ScaleKind = "linear" | "log";

export interface Curve {
  x: number[];
  y: number[];
  label?: string;
  color?: string;
  dots?: boolean;
}

export interface PlotSpec {
  title: string;
  xlabel: string;
  ylabel: string;
  xscale?: ScaleKind;
  yscale?: ScaleKind;
  curves: Curve[];
  annotations?: string[];
  width?: number;
  height?: number;
}

const PALETTE = ["#1f6feb", "#d1242f", "#1a7f37", "#9a6700", "#8250df", "#bf3989"];
const MARGIN = { left: 70, right: 20, top: 36, bottom: 46 };

function finitePairs(c: Curve, xscale: ScaleKind, yscale: ScaleKind): [number, number][] {
  const out: [number, number][] = [];
  for (let i = 0; i < c.x.length; i++) {
    const x = c.x[i];
    const y = c.y[i];
    if (!Number.isFinite(x) || !Number.isFinite(y)) continue;
    if (xscale === "log" && x <= 0) continue;
    if (yscale === "log" && y <= 0) continue;
    out.push([x, y]);
  }
  return out;
}

class Scale {
  constructor(
    readonly kind: ScaleKind,
    readonly lo: number,
    readonly hi: number,
    readonly pixLo: number,
    readonly pixHi: number,
  ) {}

  private fwd(v: number): number {
    return this.kind === "log" ? Math.log10(v) : v;
  }

  map(v: number): number {
    const a = this.fwd(this.lo);
    const b = this.fwd(this.hi);
    const t = b === a ? 0.5 : (this.fwd(v) - a) / (b - a);
    return this.pixLo + t * (this.pixHi - this.pixLo);
  }

  ticks(n = 5): number[] {
    if (this.kind === "log") {
      const lo = Math.ceil(Math.log10(this.lo) - 1e-9);
      const hi = Math.floor(Math.log10(this.hi) + 1e-9);
      const out: number[] = [];
      const step = Math.max(1, Math.round((hi - lo) / n));
      for (let e = lo; e <= hi; e += step) out.push(10 ** e);
      return out.length >= 2 ? out : [this.lo, this.hi];
    }
    const span = this.hi - this.lo;
    if (span <= 0) return [this.lo];
    const raw = span / n;
    const mag = 10 ** Math.floor(Math.log10(raw));
    const step = [1, 2, 5, 10].map((m) => m * mag).find((s) => span / s <= n + 1) ?? mag * 10;
    const start = Math.ceil(this.lo / step) * step;
    const out: number[] = [];
    for (let v = start; v <= this.hi + 1e-12 * Math.abs(span); v += step) out.push(v);
    return out;
  }
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1).replace("e+", "e");
  return String(Math.round(v * 1e6) / 1e6);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

/** Render a plot spec to a standalone SVG string. */
export function renderPlot(spec: PlotSpec): string {
  const W = spec.width ?? 640;
  const H = spec.height ?? 420;
  const xscale = spec.xscale ?? "linear";
  const yscale = spec.yscale ?? "linear";
  const pts = spec.curves.map((c) => finitePairs(c, xscale, yscale));
  const all = pts.flat();

  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}" font-family="Helvetica,Arial,sans-serif">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(`<text x="${W / 2}" y="20" text-anchor="middle" font-size="14" font-weight="bold">${esc(spec.title)}</text>`);

  if (all.length === 0) {
    parts.push(`<text x="${W / 2}" y="${H / 2}" text-anchor="middle" font-size="13" fill="#57606a">no data</text>`);
    parts.push("</svg>");
    return parts.join("\n");
  }

  let xlo = Math.min(...all.map((p) => p[0]));
  let xhi = Math.max(...all.map((p) => p[0]));
  let ylo = Math.min(...all.map((p) => p[1]));
  let yhi = Math.max(...all.map((p) => p[1]));
  if (xlo === xhi) [xlo, xhi] = [xlo - 0.5, xhi + 0.5];
  if (ylo === yhi) [ylo, yhi] = yscale === "log" ? [ylo / 2, yhi * 2] : [ylo - 0.5, yhi + 0.5];

  const sx = new Scale(xscale, xlo, xhi, MARGIN.left, W - MARGIN.right);
  const sy = new Scale(yscale, ylo, yhi, H - MARGIN.bottom, MARGIN.top);

  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${W - MARGIN.left - MARGIN.right}" height="${H - MARGIN.top - MARGIN.bottom}" fill="none" stroke="#d0d7de"/>`);
  for (const tx of sx.ticks()) {
    const px = sx.map(tx);
    parts.push(`<line x1="${px.toFixed(1)}" y1="${H - MARGIN.bottom}" x2="${px.toFixed(1)}" y2="${H - MARGIN.bottom + 4}" stroke="#57606a"/>`);
    parts.push(`<text x="${px.toFixed(1)}" y="${H - MARGIN.bottom + 16}" text-anchor="middle" font-size="10">${fmt(tx)}</text>`);
  }
  for (const ty of sy.ticks()) {
    const py = sy.map(ty);
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${py.toFixed(1)}" x2="${MARGIN.left}" y2="${py.toFixed(1)}" stroke="#57606a"/>`);
    parts.push(`<text x="${MARGIN.left - 6}" y="${(py + 3).toFixed(1)}" text-anchor="end" font-size="10">${fmt(ty)}</text>`);
  }
  parts.push(`<text x="${W / 2}" y="${H - 8}" text-anchor="middle" font-size="12">${esc(spec.xlabel)}</text>`);
  parts.push(`<text x="16" y="${H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 16 ${H / 2})">${esc(spec.ylabel)}</text>`);

  spec.curves.forEach((c, ci) => {
    const color = c.color ?? PALETTE[ci % PALETTE.length];
    const p = pts[ci];
    if (p.length === 0) return;
    if (c.dots) {
      for (const [x, y] of p) {
        parts.push(`<circle cx="${sx.map(x).toFixed(1)}" cy="${sy.map(y).toFixed(1)}" r="2" fill="${color}"/>`);
      }
    } else {
      const d = p.map(([x, y], i) => `${i === 0 ? "M" : "L"}${sx.map(x).toFixed(1)} ${sy.map(y).toFixed(1)}`).join(" ");
      parts.push(`<path d="${d}" fill="none" stroke="${color}" stroke-width="1.5"/>`);
    }
  });

  const withLabels = spec.curves.filter((c) => c.label);
  withLabels.forEach((c, i) => {
    const color = c.color ?? PALETTE[spec.curves.indexOf(c) % PALETTE.length];
    const y = MARGIN.top + 14 + 14 * i;
    parts.push(`<line x1="${W - MARGIN.right - 120}" y1="${y - 4}" x2="${W - MARGIN.right - 100}" y2="${y - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${W - MARGIN.right - 95}" y="${y}" font-size="11">${esc(c.label ?? "")}</text>`);
  });

  (spec.annotations ?? []).forEach((a, i) => {
    parts.push(`<text x="${MARGIN.left + 8}" y="${MARGIN.top + 14 + 14 * i}" font-size="11" fill="#24292f">${esc(a)}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}
