/**
 * Readers for the run-directory artifacts written by the filtering package.
 *
 * Every CSV starts with a `# schema:` comment line followed by a header row;
 * summary.json carries run metadata (filter name, particle count, mesh
 * coordinates). All readers are strictly read-only.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";
import Papa from "papaparse";

export interface Table {
  schema: string;
  header: string[];
  rows: number[][];
}

export interface Diagnostics {
  window: number[];
  ess: number[];
  rmse: number[];
  rb: number[];
  res: number[];
}

export interface Observations {
  window: number[];
  point: number[];
  position: number[];
  value: number[];
}

export interface RunSummary {
  filter: string;
  n_particles: number;
  n_windows: number;
  n_dof: number;
  dof_x: number[];
  obs_positions: number[];
}

function toNumber(v: unknown): number {
  return typeof v === "number" ? v : Number(v);
}

export function readTable(path: string, expectSchema: string): Table {
  const text = readFileSync(path, "utf8");
  const firstLine = text.slice(0, text.indexOf("\n"));
  const schema = firstLine.startsWith("# schema: ")
    ? firstLine.slice("# schema: ".length).trim()
    : "";
  if (schema !== expectSchema) {
    throw new Error(
      `${path}: expected schema "${expectSchema}", found "${schema || "none"}"`,
    );
  }
  const parsed = Papa.parse<unknown[]>(text, {
    delimiter: ",",
    comments: "#",
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    throw new Error(`${path}: ${parsed.errors[0].message}`);
  }
  const [head, ...body] = parsed.data;
  return {
    schema,
    header: (head as unknown[]).map(String),
    rows: body.map((row) => row.map(toNumber)),
  };
}

export function column(table: Table, name: string, path: string): number[] {
  const j = table.header.indexOf(name);
  if (j < 0) {
    throw new Error(
      `${path}: missing column "${name}" (found: ${table.header.join(", ")})`,
    );
  }
  return table.rows.map((r) => r[j]);
}

export function loadDiagnostics(dir: string): Diagnostics {
  const path = join(dir, "diagnostics.csv");
  const t = readTable(path, "spdefilter-diagnostics-v1");
  return {
    window: column(t, "window_index", path),
    ess: column(t, "ess", path),
    rmse: column(t, "rmse", path),
    rb: column(t, "rb", path),
    res: column(t, "res", path),
  };
}

export function loadRanks(dir: string): number[] {
  const path = join(dir, "ranks.csv");
  return column(readTable(path, "spdefilter-ranks-v1"), "rank", path);
}

/** Truth dof values for one window (window 0 is the initial state). */
export function loadTruthRow(dir: string, window: number): number[] {
  const path = join(dir, "truth.csv");
  const t = readTable(path, "spdefilter-truth-v1");
  const windows = column(t, "window_index", path);
  const k = windows.indexOf(window);
  if (k < 0) throw new Error(`${path}: no row for window ${window}`);
  return t.rows[k].slice(1);
}

export function loadObservations(dir: string): Observations {
  const path = join(dir, "observations.csv");
  const t = readTable(path, "spdefilter-observations-v1");
  return {
    window: column(t, "window_index", path),
    point: column(t, "point_index", path),
    position: column(t, "position", path),
    value: column(t, "value", path),
  };
}

/** Snapshot matrix with one row per dof, one column per particle. */
export function loadSnapshot(dir: string, window: number): number[][] {
  const name = `window_${String(window).padStart(5, "0")}.csv`;
  const path = join(dir, "snapshots", name);
  let t: Table;
  try {
    t = readTable(path, "spdefilter-snapshot-v1");
  } catch (err) {
    if ((err as NodeJS.ErrnoException).code === "ENOENT") {
      throw new Error(`${dir}: missing snapshot for window ${window} (${name})`);
    }
    throw err;
  }
  return t.rows;
}

export function loadSummary(dir: string): RunSummary {
  const raw = JSON.parse(readFileSync(join(dir, "summary.json"), "utf8"));
  for (const key of ["filter", "n_particles", "dof_x"]) {
    if (!(key in raw)) {
      throw new Error(`${dir}/summary.json: missing field "${key}"`);
    }
  }
  return raw as RunSummary;
}
