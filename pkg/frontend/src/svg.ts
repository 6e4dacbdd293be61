/**
 * Text-only SVG assembly. Nothing here touches the DOM, so output is
 * byte-reproducible: same inputs, same string.
 */

import { scaleLinear, type ScaleLinear } from "d3";

export type Scale = ScaleLinear<number, number>;

export interface Frame {
  x: number;
  y: number;
  width: number;
  height: number;
}

export const FONT = "12px sans-serif";

export function fmt(v: number): string {
  // fixed short representation keeps paths compact and stable
  return Number(v.toFixed(2)).toString();
}

export function makeScale(
  domain: [number, number],
  range: [number, number],
): Scale {
  let [lo, hi] = domain;
  if (!Number.isFinite(lo) || !Number.isFinite(hi)) {
    lo = 0;
    hi = 1;
  }
  if (lo === hi) {
    // widen degenerate domains so constant series sit mid-panel
    lo -= 1;
    hi += 1;
  }
  return scaleLinear([lo, hi], range);
}

export function polyline(
  pts: Array<[number, number]>,
  stroke: string,
  strokeWidth: number,
  cls: string,
): string {
  const coords = pts.map(([x, y]) => `${fmt(x)},${fmt(y)}`).join(" ");
  return `<polyline class="${cls}" fill="none" stroke="${stroke}" stroke-width="${strokeWidth}" points="${coords}"/>`;
}

export function text(
  x: number,
  y: number,
  content: string,
  anchor = "start",
  size = 12,
): string {
  return `<text x="${fmt(x)}" y="${fmt(y)}" text-anchor="${anchor}" font-size="${size}" font-family="sans-serif">${escapeXml(content)}</text>`;
}

export function escapeXml(s: string): string {
  return s
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

/** Axis lines, ticks, and tick labels for one plot frame. */
export function axes(frame: Frame, xScale: Scale, yScale: Scale): string {
  const parts: string[] = [];
  const x0 = frame.x;
  const y0 = frame.y + frame.height;
  parts.push(
    `<line x1="${fmt(x0)}" y1="${fmt(y0)}" x2="${fmt(x0 + frame.width)}" y2="${fmt(y0)}" stroke="#333"/>`,
    `<line x1="${fmt(x0)}" y1="${fmt(frame.y)}" x2="${fmt(x0)}" y2="${fmt(y0)}" stroke="#333"/>`,
  );
  for (const t of xScale.ticks(6)) {
    const px = xScale(t);
    parts.push(
      `<line x1="${fmt(px)}" y1="${fmt(y0)}" x2="${fmt(px)}" y2="${fmt(y0 + 4)}" stroke="#333"/>`,
      text(px, y0 + 16, tickLabel(t), "middle", 10),
    );
  }
  for (const t of yScale.ticks(5)) {
    const py = yScale(t);
    parts.push(
      `<line x1="${fmt(x0 - 4)}" y1="${fmt(py)}" x2="${fmt(x0)}" y2="${fmt(py)}" stroke="#333"/>`,
      text(x0 - 6, py + 3, tickLabel(t), "end", 10),
    );
  }
  return parts.join("\n");
}

function tickLabel(v: number): string {
  if (v !== 0 && (Math.abs(v) >= 1e4 || Math.abs(v) < 1e-3)) {
    return v.toExponential(1);
  }
  return Number(v.toPrecision(6)).toString();
}

export function document(width: number, height: number, body: string): string {
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}" font-family="sans-serif">`,
    `<rect width="${width}" height="${height}" fill="white"/>`,
    body,
    "</svg>",
    "",
  ].join("\n");
}
