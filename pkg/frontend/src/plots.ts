/**
 * Figure builders: run directories in, standalone SVG markup out.
 *
 * Each builder returns the SVG string plus the numbers that went into it,
 * so callers (and tests) can inspect content without parsing markup.
 */

import { basename } from "node:path";
import {
  type Diagnostics,
  loadDiagnostics,
  loadObservations,
  loadRanks,
  loadSnapshot,
  loadSummary,
  loadTruthRow,
  type RunSummary,
} from "./csv.js";
import {
  axes,
  document,
  type Frame,
  fmt,
  makeScale,
  polyline,
  text,
} from "./svg.js";

export const COLORS = ["#1f77b4", "#d62728", "#2ca02c"];

export type Metric = "rmse" | "rb" | "res";

export interface SeriesOptions {
  metric?: Metric;
  every?: number;
  rescaled?: boolean;
}

export interface SeriesResult {
  svg: string;
  legend: string[];
  pointCounts: number[];
  panels: number;
}

export interface HistogramResult {
  svg: string;
  bins: number[];
}

export interface SnapshotPanel {
  window: number;
  origin: [number, number];
  particleCount: number;
  truthCurve: Array<[number, number]>;
}

export interface SnapshotResult {
  svg: string;
  panels: SnapshotPanel[];
}

interface SeriesRun {
  dir: string;
  label: string;
  summary: RunSummary;
  diag: Diagnostics;
}

function loadSeriesRuns(dirs: string[]): SeriesRun[] {
  if (dirs.length < 1 || dirs.length > 3) {
    throw new Error(`expected 1 to 3 run directories, got ${dirs.length}`);
  }
  const runs = dirs.map((dir) => {
    const summary = loadSummary(dir);
    return { dir, label: summary.filter, summary, diag: loadDiagnostics(dir) };
  });
  const seen = new Map<string, number>();
  for (const run of runs) {
    const n = seen.get(run.label) ?? 0;
    seen.set(run.label, n + 1);
    if (n > 0) run.label = `${run.label} (${basename(run.dir)})`;
  }
  const ref = runs[0].diag.window;
  for (const run of runs.slice(1)) {
    const w = run.diag.window;
    if (w.length !== ref.length || w.some((v, i) => v !== ref[i])) {
      throw new Error(
        `window indices differ between ${runs[0].dir} and ${run.dir}`,
      );
    }
  }
  return runs;
}

function every<T>(xs: T[], k: number): T[] {
  if (!Number.isInteger(k) || k < 1) {
    throw new Error(`downsampling step must be a positive integer, got ${k}`);
  }
  return xs.filter((_, i) => i % k === 0);
}

function finiteExtent(series: number[][]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const ys of series) {
    for (const y of ys) {
      if (Number.isFinite(y)) {
        lo = Math.min(lo, y);
        hi = Math.max(hi, y);
      }
    }
  }
  return [lo, hi];
}

function seriesPanel(
  frame: Frame,
  windows: number[],
  runs: Array<{ label: string; ys: number[]; color: string }>,
  yLabel: string,
): string {
  const xScale = makeScale(
    [windows[0], windows[windows.length - 1]],
    [frame.x, frame.x + frame.width],
  );
  const yScale = makeScale(finiteExtent(runs.map((r) => r.ys)), [
    frame.y + frame.height,
    frame.y,
  ]);
  const parts = [axes(frame, xScale, yScale)];
  runs.forEach((run, i) => {
    const pts = windows
      .map((w, j) => [w, run.ys[j]] as [number, number])
      .filter(([, y]) => Number.isFinite(y))
      .map(([w, y]) => [xScale(w), yScale(y)] as [number, number]);
    parts.push(polyline(pts, run.color, 1.5, "series"));
    const lx = frame.x + frame.width - 150;
    const ly = frame.y + 14 + 16 * i;
    parts.push(
      `<line x1="${fmt(lx)}" y1="${fmt(ly - 4)}" x2="${fmt(lx + 22)}" y2="${fmt(ly - 4)}" stroke="${run.color}" stroke-width="1.5"/>`,
      text(lx + 28, ly, run.label),
    );
  });
  parts.push(
    text(frame.x + frame.width / 2, frame.y + frame.height + 32, "window", "middle"),
    text(frame.x - 44, frame.y - 10, yLabel),
  );
  return parts.join("\n");
}

function buildSeriesFigure(
  dirs: string[],
  yColumn: (d: Diagnostics) => number[],
  yLabel: string,
  opts: SeriesOptions,
): SeriesResult {
  const k = opts.every ?? 1;
  const runs = loadSeriesRuns(dirs);
  const windows = every(runs[0].diag.window, k);
  const series = runs.map((run, i) => ({
    label: run.label,
    ys: every(yColumn(run.diag), k),
    color: COLORS[i],
  }));

  const width = 760;
  const panelHeight = 330;
  const margin = { left: 64, right: 20, top: 34, bottom: 56 };
  const panelRuns: Array<typeof series> = [series];
  if (opts.rescaled && runs.length > 1) {
    const rest = series.filter((_, i) => runs[i].label !== "bootstrap");
    panelRuns.push(rest.length > 0 ? rest : series);
  }

  const body: string[] = [];
  panelRuns.forEach((panel, p) => {
    const frame: Frame = {
      x: margin.left,
      y: margin.top + p * (panelHeight + margin.top + margin.bottom),
      width: width - margin.left - margin.right,
      height: panelHeight,
    };
    body.push(seriesPanel(frame, windows, panel, yLabel));
  });
  const height =
    panelRuns.length * (panelHeight + margin.top + margin.bottom);
  return {
    svg: document(width, height, body.join("\n")),
    legend: series.map((s) => s.label),
    pointCounts: series.map((s) => s.ys.length),
    panels: panelRuns.length,
  };
}

export function plotTimeseries(
  dirs: string[],
  opts: SeriesOptions = {},
): SeriesResult {
  const metric = opts.metric ?? "rmse";
  return buildSeriesFigure(dirs, (d) => d[metric], metric.toUpperCase(), opts);
}

export function plotEss(dirs: string[], opts: SeriesOptions = {}): SeriesResult {
  return buildSeriesFigure(dirs, (d) => d.ess, "ESS", opts);
}

export function plotRankHistogram(dir: string): HistogramResult {
  const summary = loadSummary(dir);
  const ranks = loadRanks(dir);
  if (ranks.length === 0) {
    throw new Error(`${dir}: ranks.csv has no rows`);
  }
  const nBins = summary.n_particles + 1;
  const bins = new Array<number>(nBins).fill(0);
  for (const r of ranks) {
    if (!Number.isInteger(r) || r < 0 || r >= nBins) {
      throw new Error(`${dir}: rank ${r} outside 0..${nBins - 1}`);
    }
    bins[r] += 1;
  }

  const width = 760;
  const height = 440;
  const frame: Frame = { x: 64, y: 34, width: 676, height: 340 };
  const xScale = makeScale([0, nBins], [frame.x, frame.x + frame.width]);
  const yScale = makeScale([0, Math.max(...bins)], [
    frame.y + frame.height,
    frame.y,
  ]);
  const y0 = frame.y + frame.height;
  const parts = [axes(frame, xScale, yScale)];
  bins.forEach((count, r) => {
    const x = xScale(r);
    const barWidth = xScale(r + 1) - x;
    const top = yScale(count);
    parts.push(
      `<rect class="bin" x="${fmt(x + 1)}" y="${fmt(top)}" width="${fmt(barWidth - 2)}" height="${fmt(y0 - top)}" fill="#1f77b4"/>`,
    );
  });
  const expected = ranks.length / nBins;
  const ey = yScale(expected);
  parts.push(
    `<line x1="${fmt(frame.x)}" y1="${fmt(ey)}" x2="${fmt(frame.x + frame.width)}" y2="${fmt(ey)}" stroke="#555" stroke-dasharray="4 3"/>`,
    text(frame.x + frame.width / 2, y0 + 32, "rank of truth in ensemble", "middle"),
    text(frame.x - 44, frame.y - 10, "count"),
  );
  return { svg: document(width, height, parts.join("\n")), bins };
}

export function plotSnapshot(
  dir: string,
  windows: number[],
): SnapshotResult {
  if (windows.length < 1 || windows.length > 4) {
    throw new Error(`expected 1 to 4 windows, got ${windows.length}`);
  }
  const summary = loadSummary(dir);
  const dofX = summary.dof_x;
  const order = dofX
    .map((x, i) => [x, i] as [number, number])
    .sort((a, b) => a[0] - b[0])
    .map(([, i]) => i);
  const obs = loadObservations(dir);

  const cols = windows.length === 1 ? 1 : 2;
  const rows = Math.ceil(windows.length / cols);
  const panelWidth = windows.length === 1 ? 676 : 380;
  const panelHeight = windows.length === 1 ? 340 : 240;
  const margin = { left: 56, right: 16, top: 34, bottom: 48 };
  const cellW = margin.left + panelWidth + margin.right;
  const cellH = margin.top + panelHeight + margin.bottom;

  const body: string[] = [];
  const panels: SnapshotPanel[] = [];
  windows.forEach((w, p) => {
    const frame: Frame = {
      x: margin.left + (p % cols) * cellW,
      y: margin.top + Math.floor(p / cols) * cellH,
      width: panelWidth,
      height: panelHeight,
    };
    const matrix = loadSnapshot(dir, w);
    if (matrix.length !== dofX.length) {
      throw new Error(
        `${dir}: snapshot for window ${w} has ${matrix.length} dofs, mesh has ${dofX.length}`,
      );
    }
    const nParticles = matrix[0].length;
    const truth = loadTruthRow(dir, w);
    const obsIdx = obs.window
      .map((ow, i) => (ow === w ? i : -1))
      .filter((i) => i >= 0);

    const values: number[][] = [truth, obs.value.filter((_, i) => obsIdx.includes(i))];
    for (let i = 0; i < matrix.length; i++) values.push(matrix[i]);
    const xScale = makeScale(
      [dofX[order[0]], dofX[order[order.length - 1]]],
      [frame.x, frame.x + frame.width],
    );
    const yScale = makeScale(finiteExtent(values), [
      frame.y + frame.height,
      frame.y,
    ]);

    const parts = [axes(frame, xScale, yScale)];
    for (let q = 0; q < nParticles; q++) {
      const pts = order.map(
        (i) => [xScale(dofX[i]), yScale(matrix[i][q])] as [number, number],
      );
      parts.push(polyline(pts, "#9ecae1", 0.8, "particle"));
    }
    const truthCurve = order.map(
      (i) => [dofX[i], truth[i]] as [number, number],
    );
    parts.push(
      polyline(
        truthCurve.map(([x, y]) => [xScale(x), yScale(y)]),
        "#222",
        1.8,
        "truth",
      ),
    );
    for (const i of obsIdx) {
      parts.push(
        `<circle class="obs" cx="${fmt(xScale(obs.position[i]))}" cy="${fmt(yScale(obs.value[i]))}" r="3.5" fill="#d62728"/>`,
      );
    }
    parts.push(
      text(frame.x + frame.width / 2, frame.y - 12, `window ${w}`, "middle"),
      text(frame.x + frame.width / 2, frame.y + frame.height + 32, "x", "middle"),
    );
    body.push(parts.join("\n"));
    panels.push({
      window: w,
      origin: [frame.x, frame.y],
      particleCount: nParticles,
      truthCurve,
    });
  });

  return {
    svg: document(cols * cellW, rows * cellH, body.join("\n")),
    panels,
  };
}
