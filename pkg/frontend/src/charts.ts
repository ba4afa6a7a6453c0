/**
 * Timeline chart: one line per state probability plus the position score,
 * drawn straight from served timeline points. What-if previews render as a
 * dashed overlay. Pure data helpers are kept separate from canvas work so
 * they stay testable without a 2D context.
 */

import type { TimelinePoint } from "./api.js";

// Colors keyed by state order so legends stay stable across views.
export const STATE_COLORS = [
  "#8a8f98", // neutral: grey
  "#3b82f6",
  "#10b981",
  "#f59e0b",
  "#ef4444",
  "#a855f7",
  "#14b8a6",
  "#e11d48",
];

export const SCORE_COLOR = "#111827";

export interface SeriesPoint {
  t: number;
  value: number;
}

export interface Series {
  label: string;
  color: string;
  points: SeriesPoint[];
  dashed: boolean;
  axis: "probability" | "score";
}

export function probabilitySeries(
  points: TimelinePoint[],
  stateIds: string[],
  dashed = false,
): Series[] {
  return stateIds.map((sid, i) => ({
    label: sid,
    color: STATE_COLORS[i % STATE_COLORS.length],
    dashed,
    axis: "probability",
    points: points.map((p) => ({ t: p.t, value: p.posterior[sid] })),
  }));
}

export function scoreSeries(points: TimelinePoint[], dashed = false): Series {
  return {
    label: "score",
    color: SCORE_COLOR,
    dashed,
    axis: "score",
    points: points.map((p) => ({ t: p.t, value: p.score })),
  };
}

export function nearestPoint(points: TimelinePoint[], t: number): TimelinePoint | null {
  if (points.length === 0) return null;
  let best = points[0];
  for (const p of points) {
    if (Math.abs(p.t - t) < Math.abs(best.t - t)) best = p;
  }
  return best;
}

export interface ChartScale {
  tMin: number;
  tMax: number;
  scoreMax: number;
  width: number;
  height: number;
  pad: number;
}

export function chartScale(series: Series[], width: number, height: number): ChartScale {
  let tMin = Infinity;
  let tMax = -Infinity;
  let scoreMax = 1;
  for (const s of series) {
    for (const p of s.points) {
      tMin = Math.min(tMin, p.t);
      tMax = Math.max(tMax, p.t);
      if (s.axis === "score") scoreMax = Math.max(scoreMax, p.value);
    }
  }
  if (!Number.isFinite(tMin)) {
    tMin = 0;
    tMax = 1;
  }
  if (tMax === tMin) tMax = tMin + 1;
  return { tMin, tMax, scoreMax, width, height, pad: 28 };
}

export function xPixel(scale: ChartScale, t: number): number {
  const span = scale.width - 2 * scale.pad;
  return scale.pad + ((t - scale.tMin) / (scale.tMax - scale.tMin)) * span;
}

export function yPixel(scale: ChartScale, value: number, axis: Series["axis"]): number {
  const top = scale.pad / 2;
  const span = scale.height - scale.pad - top;
  const unit = axis === "score" ? value / scale.scoreMax : value;
  return scale.height - scale.pad - unit * span;
}

export function tFromPixel(scale: ChartScale, x: number): number {
  const span = scale.width - 2 * scale.pad;
  return scale.tMin + ((x - scale.pad) / span) * (scale.tMax - scale.tMin);
}

/** Draw onto a canvas; silently skips when no 2D context exists (jsdom). */
export function drawChart(canvas: HTMLCanvasElement, series: Series[]): ChartScale {
  const scale = chartScale(series, canvas.width, canvas.height);
  const ctx = canvas.getContext("2d");
  if (!ctx) return scale;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.fillStyle = "#ffffff";
  ctx.fillRect(0, 0, canvas.width, canvas.height);

  ctx.strokeStyle = "#d1d5db";
  ctx.lineWidth = 1;
  ctx.strokeRect(scale.pad, scale.pad / 2, canvas.width - 2 * scale.pad, canvas.height - 1.5 * scale.pad);
  ctx.fillStyle = "#6b7280";
  ctx.font = "10px sans-serif";
  ctx.fillText("1.0", 4, scale.pad / 2 + 8);
  ctx.fillText("0.0", 4, canvas.height - scale.pad);
  ctx.fillText(String(scale.tMin), scale.pad, canvas.height - 8);
  ctx.fillText(String(scale.tMax), canvas.width - scale.pad - 12, canvas.height - 8);

  for (const s of series) {
    if (s.points.length === 0) continue;
    ctx.strokeStyle = s.color;
    ctx.lineWidth = s.axis === "score" ? 2 : 1.5;
    ctx.setLineDash(s.dashed ? [5, 4] : []);
    ctx.beginPath();
    s.points.forEach((p, i) => {
      const x = xPixel(scale, p.t);
      const y = yPixel(scale, p.value, s.axis);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
    if (s.points.length === 1) {
      const p = s.points[0];
      ctx.fillStyle = s.color;
      ctx.beginPath();
      ctx.arc(xPixel(scale, p.t), yPixel(scale, p.value, s.axis), 3, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
  ctx.setLineDash([]);
  return scale;
}
