#!/usr/bin/env node
/**
 * plotkit <kind> <csv...> -o <image.svg>
 *
 * Renders one figure from one or more ccgsim CSV artifacts. The input
 * schema must match the plot kind; on any failure nothing is written.
 * Exit codes: 0 success, 2 usage or schema error, 1 unexpected error.
 */

import { writeFileSync } from "fs";
import { SchemaError, readCsv } from "./csv";
import { KINDS, renderKind } from "./kinds";

function usage(): string {
  return (
    `usage: plotkit <kind> <csv...> -o <image.svg>\n` +
    `kinds: ${Object.keys(KINDS).join(", ")}`
  );
}

export function main(argv: string[]): number {
  const args = [...argv];
  let out: string | null = null;
  const positional: string[] = [];
  while (args.length) {
    const a = args.shift()!;
    if (a === "-o" || a === "--out") {
      out = args.shift() ?? null;
    } else if (a === "-h" || a === "--help") {
      console.log(usage());
      return 0;
    } else {
      positional.push(a);
    }
  }
  if (positional.length < 2 || !out) {
    console.error(usage());
    return 2;
  }
  const [kind, ...paths] = positional;
  try {
    const tables = paths.map((p) => readCsv(p));
    const svg = renderKind(kind, tables);
    writeFileSync(out, svg, "utf-8");
    console.log(out);
    return 0;
  } catch (err) {
    if (err instanceof SchemaError || (err instanceof Error && /unknown plot kind|no input/.test(err.message))) {
      console.error(`plotkit: ${(err as Error).message}`);
      return 2;
    }
    console.error(`plotkit: ${err instanceof Error ? err.message : String(err)}`);
    return 1;
  }
}

if (require.main === module) {
  process.exitCode = main(process.argv.slice(2));
}
