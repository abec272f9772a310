/**
 * Reader for ccgsim CSV artifacts.
 *
 * Files carry their resolved settings as `# key = value` comment lines
 * and a `# schema:` line naming every column with its unit. The reader
 * validates the schema against the header row and refuses anything it
 * cannot account for, so downstream plots never guess at the contents.
 */

import { readFileSync } from "fs";

export const MAGIC = "# ccgsim-csv 1";

export interface Table {
  path: string;
  meta: Record<string, string>;
  columns: string[];
  units: string[];
  data: number[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string, path = "<memory>"): Table {
  const lines = text.split(/\r?\n/);
  if (lines[0] !== MAGIC) {
    throw new SchemaError(`${path}: not a ccgsim table (missing magic line)`);
  }
  const meta: Record<string, string> = {};
  let schema: string | null = null;
  let header: string[] | null = null;
  const data: number[][] = [];
  for (const line of lines.slice(1)) {
    if (line === "") continue;
    if (line.startsWith("# schema: ")) {
      schema = line.slice("# schema: ".length);
    } else if (line.startsWith("# ")) {
      const body = line.slice(2);
      const idx = body.indexOf(" = ");
      if (idx >= 0) meta[body.slice(0, idx)] = body.slice(idx + 3);
    } else if (header === null) {
      header = line.split(",");
    } else {
      const row = line.split(",").map(Number);
      if (row.some((v) => Number.isNaN(v))) {
        throw new SchemaError(`${path}: non-numeric data row: ${line}`);
      }
      data.push(row);
    }
  }
  if (schema === null || header === null) {
    throw new SchemaError(`${path}: missing schema or header line`);
  }
  const columns: string[] = [];
  const units: string[] = [];
  for (const entry of schema.split(",")) {
    const m = entry.match(/^(.+)\[(.*)\]$/);
    if (!m) throw new SchemaError(`${path}: malformed schema entry ${entry}`);
    columns.push(m[1]);
    units.push(m[2]);
  }
  if (columns.length !== header.length || columns.some((c, i) => c !== header[i])) {
    throw new SchemaError(`${path}: header row disagrees with the schema line`);
  }
  for (const row of data) {
    if (row.length !== columns.length) {
      throw new SchemaError(`${path}: ragged data row`);
    }
  }
  return { path, meta, columns, units, data };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"), path);
}

export function column(table: Table, name: string): number[] {
  const idx = table.columns.indexOf(name);
  if (idx < 0) {
    throw new SchemaError(
      `${table.path}: required column '${name}' not present (have: ${table.columns.join(", ")})`,
    );
  }
  return table.data.map((row) => row[idx]);
}

export function unitOf(table: Table, name: string): string {
  const idx = table.columns.indexOf(name);
  return idx >= 0 ? table.units[idx] : "";
}

export function requireColumns(table: Table, names: string[]): void {
  for (const name of names) column(table, name);
}
