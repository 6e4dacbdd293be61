import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

export function lcg(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (1664525 * state + 1013904223) >>> 0;
    return state / 2 ** 32;
  };
}

function csv(schema: string, header: string[], rows: Array<Array<number | string>>): string {
  const lines = [`# schema: ${schema}`, header.join(",")];
  for (const row of rows) lines.push(row.join(","));
  return lines.join("\n") + "\n";
}

export interface FixtureOptions {
  filter?: string;
  nParticles?: number;
  nWindows?: number;
  nObs?: number;
  dofX?: number[];
  metric?: (w: number) => number;
  ess?: (w: number) => number;
  ranks?: number[];
  snapshotWindows?: number[];
  truth?: (w: number, dof: number) => number;
  particleValue?: (w: number, dof: number, p: number) => number;
}

/** Write a minimal, schema-conformant run directory for tests. */
export function makeRun(dir: string, opts: FixtureOptions = {}): void {
  const filter = opts.filter ?? "bootstrap";
  const nParticles = opts.nParticles ?? 4;
  const nWindows = opts.nWindows ?? 6;
  const dofX = opts.dofX ?? [0.0, 0.5, 1.0, 1.5];
  const nObs = opts.nObs ?? 2;
  const metric = opts.metric ?? ((w) => 0.1 + 0.01 * w);
  const essFn = opts.ess ?? (() => nParticles / 2);
  const truth = opts.truth ?? ((w, d) => Math.sin(d + 0.1 * w));
  const particleValue =
    opts.particleValue ?? ((w, d, p) => truth(w, d) + 0.05 * (p + 1));

  mkdirSync(join(dir, "snapshots"), { recursive: true });
  const windows = Array.from({ length: nWindows }, (_, i) => i + 1);

  writeFileSync(
    join(dir, "summary.json"),
    JSON.stringify({
      filter,
      n_particles: nParticles,
      n_windows: nWindows,
      n_dof: dofX.length,
      dof_x: dofX,
      obs_positions: dofX.slice(0, nObs),
    }) + "\n",
  );

  writeFileSync(
    join(dir, "diagnostics.csv"),
    csv(
      "spdefilter-diagnostics-v1",
      ["window_index", "ess", "rmse", "rb", "res"],
      windows.map((w) => [w, essFn(w), metric(w), metric(w) / 2, metric(w) / 4]),
    ),
  );

  const ranks =
    opts.ranks ?? windows.flatMap((w) => [w % (nParticles + 1), 0]);
  writeFileSync(
    join(dir, "ranks.csv"),
    csv(
      "spdefilter-ranks-v1",
      ["window_index", "point_index", "rank"],
      ranks.map((r, i) => [Math.floor(i / nObs) + 1, i % nObs, r]),
    ),
  );

  writeFileSync(
    join(dir, "truth.csv"),
    csv(
      "spdefilter-truth-v1",
      ["window_index", ...dofX.map((_, j) => `dof_${j}`)],
      [0, ...windows].map((w) => [w, ...dofX.map((_, d) => truth(w, d))]),
    ),
  );

  writeFileSync(
    join(dir, "observations.csv"),
    csv(
      "spdefilter-observations-v1",
      ["window_index", "point_index", "position", "value"],
      windows.flatMap((w) =>
        Array.from({ length: nObs }, (_, j) => [w, j, dofX[j], truth(w, j)]),
      ),
    ),
  );

  for (const w of opts.snapshotWindows ?? windows) {
    writeFileSync(
      join(dir, "snapshots", `window_${String(w).padStart(5, "0")}.csv`),
      csv(
        "spdefilter-snapshot-v1",
        Array.from({ length: nParticles }, (_, p) => `particle_${p}`),
        dofX.map((_, d) =>
          Array.from({ length: nParticles }, (_, p) => particleValue(w, d, p)),
        ),
      ),
    );
  }
}
