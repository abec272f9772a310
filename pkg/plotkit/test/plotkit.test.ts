import { execFileSync } from "child_process";
import { existsSync, mkdtempSync, readFileSync } from "fs";
import { tmpdir } from "os";
import { join } from "path";
import { describe, expect, it } from "vitest";

import { SchemaError, column, parseCsv, readCsv } from "../src/csv";
import { renderKind } from "../src/kinds";
import { main } from "../src/cli";

const FIX = join(__dirname, "fixtures");

const SMOKE: Array<[string, string]> = [
  ["force-deviation", "force_scan.csv"],
  ["rate-curve", "rate_curve.csv"],
  ["rate-curve", "sphere_rate_curve.csv"],
  ["heating", "heating.csv"],
  ["potential-profile", "potential_profile.csv"],
  ["R-surface", "r_surface.csv"],
];

describe("csv reader", () => {
  it("parses a real artifact with meta and schema", () => {
    const t = readCsv(join(FIX, "force_scan.csv"));
    expect(t.columns).toEqual(["r_over_sigma_nk", "f_reg", "f_newton", "rel_deviation"]);
    expect(t.meta["experiment"]).toBe("force-scan");
    expect(t.data.length).toBeGreaterThan(10);
    expect(column(t, "r_over_sigma_nk")[0]).toBeCloseTo(0.1, 6);
  });

  it("rejects files without the magic line", () => {
    expect(() => parseCsv("a,b\n1,2\n")).toThrow(SchemaError);
  });

  it("rejects header/schema mismatch", () => {
    const text = readFileSync(join(FIX, "heating.csv"), "utf-8").replace(
      "# schema: t[1/gamma]",
      "# schema: zz[1/gamma]",
    );
    expect(() => parseCsv(text)).toThrow(SchemaError);
  });
});

describe("render smoke tests", () => {
  for (const [kind, file] of SMOKE) {
    it(`renders ${kind} from ${file}`, () => {
      const svg = renderKind(kind, [readCsv(join(FIX, file))]);
      expect(svg.startsWith("<svg ")).toBe(true);
      expect(svg).toContain("</svg>");
      expect(svg.length).toBeGreaterThan(2000);
      // resolved settings are embedded for regeneration
      expect(svg).toContain("seed = 42");
    });
  }

  it("is deterministic", () => {
    const t = readCsv(join(FIX, "heating.csv"));
    expect(renderKind("heating", [t])).toBe(renderKind("heating", [t]));
  });

  it("overlays multiple tables as extra series", () => {
    const a = readCsv(join(FIX, "rate_curve.csv"));
    const b = readCsv(join(FIX, "sphere_rate_curve.csv"));
    const svg = renderKind("rate-curve", [a, b]);
    expect(svg).toContain("</svg>");
  });

  it("refuses a schema that does not match the kind", () => {
    const wrong = readCsv(join(FIX, "heating.csv"));
    expect(() => renderKind("force-deviation", [wrong])).toThrow(SchemaError);
  });

  it("refuses unknown kinds", () => {
    const t = readCsv(join(FIX, "heating.csv"));
    expect(() => renderKind("scatter3d", [t])).toThrow(/unknown plot kind/);
  });
});

describe("command line", () => {
  it("writes an image and returns 0", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const out = join(dir, "heating.svg");
    const code = main(["heating", join(FIX, "heating.csv"), "-o", out]);
    expect(code).toBe(0);
    expect(existsSync(out)).toBe(true);
    expect(readFileSync(out, "utf-8")).toContain("</svg>");
  });

  it("fails cleanly with no partial file on schema mismatch", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const out = join(dir, "bad.svg");
    const code = main(["force-deviation", join(FIX, "heating.csv"), "-o", out]);
    expect(code).toBe(2);
    expect(existsSync(out)).toBe(false);
  });

  it("reports usage without arguments", () => {
    expect(main([])).toBe(2);
  });

  it("runs through node as a subprocess", () => {
    const dir = mkdtempSync(join(tmpdir(), "plotkit-"));
    const out = join(dir, "r.svg");
    execFileSync("node", [join(__dirname, "..", "dist", "cli.js"), "R-surface",
      join(FIX, "r_surface.csv"), "-o", out]);
    expect(existsSync(out)).toBe(true);
  });
});
