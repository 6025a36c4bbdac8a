/** SVG sparkline geometry for the entropy trajectory. */

import type { EntropyPoint } from "./api.js";

export interface SparklineGeometry {
  path: string;
  errorBars: { x: number; y1: number; y2: number }[];
  points: { x: number; y: number }[];
}

/**
 * Map entropy points to an SVG polyline path inside a width x height box.
 * A lone baseline point renders as a dot at the left edge.
 */
export function sparklineGeometry(
  points: EntropyPoint[],
  width: number,
  height: number,
  pad = 4,
): SparklineGeometry {
  if (points.length === 0) {
    return { path: "", errorBars: [], points: [] };
  }
  const steps = points.map((p) => p.step);
  const lows = points.map((p) => p.bits - p.se);
  const highs = points.map((p) => p.bits + p.se);
  const xMax = Math.max(1, ...steps);
  const yMin = Math.min(...lows);
  const yMax = Math.max(...highs);
  const ySpan = yMax - yMin || 1;
  const toX = (step: number) => pad + (step / xMax) * (width - 2 * pad);
  const toY = (bits: number) => pad + ((yMax - bits) / ySpan) * (height - 2 * pad);

  const coords = points.map((p) => ({ x: toX(p.step), y: toY(p.bits) }));
  const path = coords
    .map((c, i) => `${i === 0 ? "M" : "L"}${c.x.toFixed(2)},${c.y.toFixed(2)}`)
    .join(" ");
  const errorBars = points
    .filter((p) => p.se > 0)
    .map((p) => ({ x: toX(p.step), y1: toY(p.bits - p.se), y2: toY(p.bits + p.se) }));
  return { path, errorBars, points: coords };
}
