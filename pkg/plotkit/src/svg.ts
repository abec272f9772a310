/**
 * Minimal deterministic SVG scene builder: linear/log axes with 1-2-5
 * ticks, polylines, error whiskers and cell heatmaps. No runtime
 * dependencies, identical input produces byte-identical output.
 */

export type ScaleKind = "linear" | "log";

export interface Scale {
  kind: ScaleKind;
  lo: number;
  hi: number;
  a: number; // pixel start
  b: number; // pixel end
}

export function makeScale(values: number[], kind: ScaleKind, a: number, b: number): Scale {
  let vals = values.filter((v) => Number.isFinite(v));
  if (kind === "log") vals = vals.filter((v) => v > 0);
  if (vals.length === 0) vals = [0, 1];
  let lo = Math.min(...vals);
  let hi = Math.max(...vals);
  if (kind === "log") {
    lo = Math.pow(10, Math.floor(Math.log10(lo)));
    hi = Math.pow(10, Math.ceil(Math.log10(hi)));
    if (lo === hi) hi = lo * 10;
  } else {
    if (lo === hi) {
      lo -= 0.5;
      hi += 0.5;
    }
    const pad = 0.06 * (hi - lo);
    lo -= pad;
    hi += pad;
  }
  return { kind, lo, hi, a, b };
}

export function project(s: Scale, v: number): number {
  const t =
    s.kind === "log"
      ? (Math.log10(v) - Math.log10(s.lo)) / (Math.log10(s.hi) - Math.log10(s.lo))
      : (v - s.lo) / (s.hi - s.lo);
  return s.a + t * (s.b - s.a);
}

export function ticks(s: Scale, target = 6): number[] {
  if (s.kind === "log") {
    const out: number[] = [];
    const lo = Math.ceil(Math.log10(s.lo) - 1e-9);
    const hi = Math.floor(Math.log10(s.hi) + 1e-9);
    const every = Math.max(1, Math.ceil((hi - lo) / target));
    for (let e = lo; e <= hi; e += every) out.push(Math.pow(10, e));
    return out;
  }
  const span = s.hi - s.lo;
  const raw = span / target;
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  const step = [1, 2, 5, 10].map((m) => m * mag).find((st) => span / st <= target) ?? mag * 10;
  const out: number[] = [];
  for (let v = Math.ceil(s.lo / step) * step; v <= s.hi + 1e-12 * span; v += step) {
    out.push(Math.abs(v) < step * 1e-9 ? 0 : v);
  }
  return out;
}

function fmtTick(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("+", "");
  return String(parseFloat(v.toPrecision(4)));
}

export class Svg {
  private parts: string[] = [];
  constructor(
    readonly width: number,
    readonly height: number,
  ) {}

  raw(s: string): void {
    this.parts.push(s);
  }

  text(x: number, y: number, s: string, opts = ""): void {
    const esc = s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
    this.parts.push(`<text x="${r2(x)}" y="${r2(y)}" ${opts}>${esc}</text>`);
  }

  line(x1: number, y1: number, x2: number, y2: number, stroke = "#444", width = 1): void {
    this.parts.push(
      `<line x1="${r2(x1)}" y1="${r2(y1)}" x2="${r2(x2)}" y2="${r2(y2)}" stroke="${stroke}" stroke-width="${width}"/>`,
    );
  }

  polyline(pts: Array<[number, number]>, stroke: string, width = 1.5, dash = ""): void {
    const d = pts
      .filter(([x, y]) => Number.isFinite(x) && Number.isFinite(y))
      .map(([x, y]) => `${r2(x)},${r2(y)}`)
      .join(" ");
    const dashAttr = dash ? ` stroke-dasharray="${dash}"` : "";
    this.parts.push(
      `<polyline points="${d}" fill="none" stroke="${stroke}" stroke-width="${width}"${dashAttr}/>`,
    );
  }

  rect(x: number, y: number, w: number, h: number, fill: string): void {
    this.parts.push(
      `<rect x="${r2(x)}" y="${r2(y)}" width="${r2(w)}" height="${r2(h)}" fill="${fill}"/>`,
    );
  }

  circle(x: number, y: number, radius: number, fill: string): void {
    this.parts.push(`<circle cx="${r2(x)}" cy="${r2(y)}" r="${radius}" fill="${fill}"/>`);
  }

  axes(xs: Scale, ys: Scale, xlabel: string, ylabel: string): void {
    this.line(xs.a, ys.a, xs.b, ys.a); // x axis at bottom (ys.a = bottom pixel)
    this.line(xs.a, ys.a, xs.a, ys.b);
    for (const t of ticks(xs)) {
      const px = project(xs, t);
      this.line(px, ys.a, px, ys.a + 4);
      this.text(px, ys.a + 16, fmtTick(t), 'text-anchor="middle" font-size="10"');
    }
    for (const t of ticks(ys)) {
      const py = project(ys, t);
      this.line(xs.a - 4, py, xs.a, py);
      this.text(xs.a - 6, py + 3, fmtTick(t), 'text-anchor="end" font-size="10"');
    }
    this.text((xs.a + xs.b) / 2, ys.a + 30, xlabel, 'text-anchor="middle" font-size="11"');
    this.text(14, (ys.a + ys.b) / 2, ylabel, `text-anchor="middle" font-size="11" transform="rotate(-90 14 ${r2((ys.a + ys.b) / 2)})"`);
  }

  render(desc: string): string {
    return (
      `<svg xmlns="http://www.w3.org/2000/svg" width="${this.width}" height="${this.height}" viewBox="0 0 ${this.width} ${this.height}">\n` +
      `<desc>${desc.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;")}</desc>\n` +
      `<rect x="0" y="0" width="${this.width}" height="${this.height}" fill="white"/>\n` +
      this.parts.join("\n") +
      "\n</svg>\n"
    );
  }
}

function r2(v: number): string {
  return (Math.round(v * 100) / 100).toString();
}

export const SERIES_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/** Perceptual-ish color ramp for heatmaps, dark blue to yellow. */
export function ramp(t: number): string {
  const clamped = Math.max(0, Math.min(1, t));
  const stops: Array<[number, number, number]> = [
    [68, 1, 84],
    [59, 82, 139],
    [33, 145, 140],
    [94, 201, 98],
    [253, 231, 37],
  ];
  const x = clamped * (stops.length - 1);
  const i = Math.min(stops.length - 2, Math.floor(x));
  const f = x - i;
  const c = stops[i].map((v, k) => Math.round(v + f * (stops[i + 1][k] - v)));
  return `rgb(${c[0]},${c[1]},${c[2]})`;
}
