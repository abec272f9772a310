/**
 * The five plot kinds and their schema requirements.
 *
 * Each kind refuses tables whose schema lacks its required columns;
 * extra tables passed on the command line overlay as more series and
 * must satisfy the same schema.
 */

import { Table, column, requireColumns, unitOf } from "./csv";
import { SERIES_COLORS, Scale, Svg, makeScale, project, ramp } from "./svg";

export interface PlotKind {
  name: string;
  required: string[];
  render(tables: Table[]): string;
}

const W = 640;
const H = 420;
const MARGIN = { left: 64, right: 16, top: 28, bottom: 44 };

function frame(svg: Svg, top: number, bottom: number): { xa: number; xb: number; ya: number; yb: number } {
  return { xa: MARGIN.left, xb: W - MARGIN.right, ya: bottom, yb: top };
}

function caption(table: Table): string {
  const exp = table.meta["experiment"] ?? "?";
  const seed = table.meta["seed"] ?? "?";
  return `${exp} (seed ${seed})`;
}

function metaDesc(tables: Table[]): string {
  const lines: string[] = [];
  for (const t of tables) {
    for (const key of Object.keys(t.meta).sort()) {
      lines.push(`${t.path}: ${key} = ${t.meta[key]}`);
    }
  }
  return lines.join("\n");
}

function seriesPlot(
  tables: Table[],
  xcol: string,
  ycols: string[],
  opts: { xlog?: boolean; ylog?: boolean; abs?: boolean; secol?: (y: string) => string | null },
): string {
  const svg = new Svg(W, H);
  const allX: number[] = [];
  const allY: number[] = [];
  for (const t of tables) {
    allX.push(...column(t, xcol));
    for (const y of ycols) {
      const vals = column(t, y).map((v) => (opts.abs ? Math.abs(v) : v));
      allY.push(...vals);
    }
  }
  const f = frame(svg, MARGIN.top, H - MARGIN.bottom);
  const xs = makeScale(allX, opts.xlog ? "log" : "linear", f.xa, f.xb);
  const ys = makeScale(allY, opts.ylog ? "log" : "linear", f.ya, f.yb);
  svg.axes(xs, ys, `${xcol} [${unitOf(tables[0], xcol)}]`, ycols.map((y) => `${y} [${unitOf(tables[0], y)}]`).join(", "));
  let k = 0;
  for (const t of tables) {
    const xv = column(t, xcol);
    for (const y of ycols) {
      const color = SERIES_COLORS[k % SERIES_COLORS.length];
      const yv = column(t, y).map((v) => (opts.abs ? Math.abs(v) : v));
      svg.polyline(xv.map((x, i) => [project(xs, x), project(ys, yv[i])] as [number, number]), color);
      const seName = opts.secol ? opts.secol(y) : null;
      if (seName && t.columns.includes(seName)) {
        const se = column(t, seName);
        xv.forEach((x, i) => {
          const px = project(xs, x);
          svg.line(px, project(ys, yv[i] - se[i]), px, project(ys, yv[i] + se[i]), color, 1);
        });
      }
      svg.text(f.xb - 4, f.yb + 12 + 12 * k, `${y} (${t.path.split("/").pop()})`, `text-anchor="end" font-size="10" fill="${color}"`);
      k += 1;
    }
  }
  svg.text(MARGIN.left, 16, caption(tables[0]), 'font-size="12"');
  return svg.render(metaDesc(tables));
}

const forceDeviation: PlotKind = {
  name: "force-deviation",
  required: ["r_over_sigma_nk", "rel_deviation"],
  render(tables) {
    return seriesPlot(tables, "r_over_sigma_nk", ["rel_deviation"], {
      xlog: true,
      ylog: true,
      abs: true,
    });
  },
};

const rateCurve: PlotKind = {
  name: "rate-curve",
  required: ["separation", "rate_re", "rate_im"],
  render(tables) {
    // two stacked panels sharing the separation axis
    const svg = new Svg(W, 2 * H - 80);
    const panels: Array<{ y: string; top: number; bottom: number }> = [
      { y: "rate_re", top: MARGIN.top, bottom: H - MARGIN.bottom - 20 },
      { y: "rate_im", top: H - 20 + MARGIN.top, bottom: 2 * H - 80 - MARGIN.bottom },
    ];
    const allX = tables.flatMap((t) => column(t, "separation"));
    for (const panel of panels) {
      const f = frame(svg, panel.top, panel.bottom);
      const xs = makeScale(allX, "linear", f.xa, f.xb);
      const vals = tables.flatMap((t) => column(t, panel.y));
      const ys = makeScale(vals, "linear", f.ya, f.yb);
      svg.axes(xs, ys, `separation [${unitOf(tables[0], "separation")}]`, `${panel.y} [${unitOf(tables[0], panel.y)}]`);
      tables.forEach((t, ti) => {
        const color = SERIES_COLORS[ti % SERIES_COLORS.length];
        const xv = column(t, "separation");
        const yv = column(t, panel.y);
        svg.polyline(xv.map((x, i) => [project(xs, x), project(ys, yv[i])] as [number, number]), color);
        const seName = `${panel.y}_se`;
        if (t.columns.includes(seName)) {
          const se = column(t, seName);
          xv.forEach((x, i) => {
            const px = project(xs, x);
            svg.line(px, project(ys, yv[i] - 3 * se[i]), px, project(ys, yv[i] + 3 * se[i]), color, 1);
          });
        }
      });
    }
    svg.text(MARGIN.left, 16, caption(tables[0]), 'font-size="12"');
    return svg.render(metaDesc(tables));
  },
};

const heating: PlotKind = {
  name: "heating",
  required: ["t", "ekin", "ekin_se"],
  render(tables) {
    return seriesPlot(tables, "t", ["ekin"], { secol: () => "ekin_se" });
  },
};

const potentialProfile: PlotKind = {
  name: "potential-profile",
  required: ["z", "phi", "phi_newton"],
  render(tables) {
    return seriesPlot(tables, "z", ["phi", "phi_newton"], {});
  },
};

const rSurface: PlotKind = {
  name: "R-surface",
  required: ["alpha", "beta", "r_factor"],
  render(tables) {
    const t = tables[0];
    const alphas = [...new Set(column(t, "alpha"))].sort((a, b) => a - b);
    const betas = [...new Set(column(t, "beta"))].sort((a, b) => a - b);
    const svg = new Svg(W, H);
    const f = frame(svg, MARGIN.top, H - MARGIN.bottom);
    const xs = makeScale(alphas, "linear", f.xa, f.xb - 60);
    const ys = makeScale(betas, "linear", f.ya, f.yb);
    const va = column(t, "alpha");
    const vb = column(t, "beta");
    const vr = column(t, "r_factor");
    const lo = Math.min(...vr);
    const hi = Math.max(...vr);
    const cw = (f.xb - 60 - f.xa) / alphas.length;
    const ch = (f.ya - f.yb) / betas.length;
    for (let i = 0; i < vr.length; i++) {
      const xi = alphas.indexOf(va[i]);
      const yi = betas.indexOf(vb[i]);
      const tval = hi > lo ? (vr[i] - lo) / (hi - lo) : 0.5;
      svg.rect(f.xa + xi * cw, f.ya - (yi + 1) * ch, cw + 0.5, ch + 0.5, ramp(tval));
    }
    svg.axes(xs, ys, "alpha (resolution / radius)", "beta (distance / radius)");
    // color bar
    const bx = f.xb - 40;
    for (let i = 0; i < 64; i++) {
      const yy = f.ya - ((i + 1) / 64) * (f.ya - f.yb);
      svg.rect(bx, yy, 14, (f.ya - f.yb) / 64 + 0.5, ramp(i / 63));
    }
    svg.text(bx + 18, f.yb + 8, hi.toPrecision(3), 'font-size="9"');
    svg.text(bx + 18, f.ya, lo.toPrecision(3), 'font-size="9"');
    svg.text(MARGIN.left, 16, caption(t), 'font-size="12"');
    return svg.render(metaDesc(tables));
  },
};

export const KINDS: Record<string, PlotKind> = Object.fromEntries(
  [forceDeviation, rateCurve, heating, potentialProfile, rSurface].map((k) => [k.name, k]),
);

export function renderKind(kindName: string, tables: Table[]): string {
  const kind = KINDS[kindName];
  if (!kind) {
    throw new Error(`unknown plot kind '${kindName}'; have: ${Object.keys(KINDS).join(", ")}`);
  }
  if (tables.length === 0) throw new Error("no input tables");
  for (const t of tables) requireColumns(t, kind.required);
  return kind.render(tables);
}
