#!/usr/bin/env node
/**
 * plot --kind timeseries|snapshot|rank_hist|ess --run DIR [--run DIR ...]
 *      --out PATH [--window N ...] [--metric rmse|rb|res] [--every K]
 *      [--rescaled]
 */

import { writeFileSync } from "node:fs";
import { pathToFileURL } from "node:url";
import yargs from "yargs";
import { hideBin } from "yargs/helpers";
import {
  type Metric,
  plotEss,
  plotRankHistogram,
  plotSnapshot,
  plotTimeseries,
} from "./plots.js";

const KINDS = ["timeseries", "snapshot", "rank_hist", "ess"] as const;
const METRICS = ["rmse", "rb", "res"] as const;

export function buildSvg(args: {
  kind: (typeof KINDS)[number];
  run: string[];
  window: number[];
  metric: Metric;
  every: number;
  rescaled: boolean;
}): string {
  switch (args.kind) {
    case "timeseries":
      return plotTimeseries(args.run, {
        metric: args.metric,
        every: args.every,
        rescaled: args.rescaled,
      }).svg;
    case "ess":
      return plotEss(args.run, { every: args.every }).svg;
    case "rank_hist":
      return plotRankHistogram(args.run[0]).svg;
    case "snapshot":
      if (args.window.length === 0) {
        throw new Error("snapshot needs at least one --window");
      }
      return plotSnapshot(args.run[0], args.window).svg;
  }
}

export function runCli(argv: string[]): number {
  const args = yargs(argv)
    .scriptName("plot")
    .usage("$0 --kind KIND --run DIR [--run DIR ...] --out PATH")
    .option("kind", { choices: KINDS, demandOption: true })
    .option("run", { type: "string", array: true, demandOption: true })
    .option("window", { type: "number", array: true, default: [] as number[] })
    .option("out", { type: "string", demandOption: true })
    .option("metric", { choices: METRICS, default: "rmse" as Metric })
    .option("every", {
      type: "number",
      default: 1,
      describe: "plot every K-th window",
    })
    .option("rescaled", {
      type: "boolean",
      default: false,
      describe: "add a second panel without the bootstrap run",
    })
    .strict()
    .parseSync();

  const svg = buildSvg(args);
  writeFileSync(args.out, svg);
  console.log(`wrote ${args.out}`);
  return 0;
}

if (import.meta.url === pathToFileURL(process.argv[1]).href) {
  try {
    process.exitCode = runCli(hideBin(process.argv));
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    process.exitCode = 1;
  }
}
