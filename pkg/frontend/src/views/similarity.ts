import type { Canvas2D } from "../canvas.js";
import { DIMMED_COLOR, clusterColor } from "../palette.js";
import { linearScale } from "../scale.js";
import type { Frame } from "../types.js";
import type { ViewState } from "../state.js";

export interface SimilarityGeometry {
  size: number; // square plot
  margin: number;
}

export const DEFAULT_SIMILARITY: SimilarityGeometry = { size: 240, margin: 16 };

interface Mapped {
  x: (v: number) => number;
  y: (v: number) => number;
}

function scales(positions: [number, number][], geom: SimilarityGeometry): Mapped {
  let xs = positions.map((p) => p[0]);
  let ys = positions.map((p) => p[1]);
  if (positions.length === 0) {
    xs = [0, 1];
    ys = [0, 1];
  }
  const pad = (lo: number, hi: number): [number, number] => {
    if (lo === hi) return [lo - 1, hi + 1];
    const gap = (hi - lo) * 0.08;
    return [lo - gap, hi + gap];
  };
  const xd = pad(Math.min(...xs), Math.max(...xs));
  const yd = pad(Math.min(...ys), Math.max(...ys));
  return {
    x: linearScale(xd, [geom.margin, geom.size - geom.margin]),
    y: linearScale(yd, [geom.size - geom.margin, geom.margin]),
  };
}

/**
 * Behavior similarity scatterplot: one point per entity at its projected
 * position, cluster-colored, with the in-progress lasso drawn dashed.
 */
export function renderSimilarityView(
  ctx: Canvas2D,
  frame: Frame,
  state: ViewState,
  which: "top" | "bottom",
  geom: SimilarityGeometry = DEFAULT_SIMILARITY,
): void {
  const layout = frame.layouts[which];
  ctx.clearRect(0, 0, geom.size, geom.size);
  ctx.strokeStyle = "#d1d5db";
  ctx.lineWidth = 1;
  ctx.strokeRect(0.5, 0.5, geom.size - 1, geom.size - 1);
  if (!layout) {
    ctx.fillStyle = "#9ca3af";
    ctx.fillText("no layout yet", geom.size / 2 - 30, geom.size / 2);
    return;
  }
  const { x, y } = scales(layout.positions, geom);
  const selection = new Set(frame.settings.selection);
  const dimming = selection.size > 0;

  layout.positions.forEach((p, e) => {
    const picked = selection.has(e);
    ctx.fillStyle =
      dimming && !picked ? DIMMED_COLOR : clusterColor(frame.clusters[e] ?? -1);
    ctx.globalAlpha = dimming && !picked ? 0.3 : 0.85;
    ctx.beginPath();
    ctx.arc(x(p[0]), y(p[1]), picked ? 4 : 3, 0, Math.PI * 2);
    ctx.fill();
  });
  ctx.globalAlpha = 1;

  if (state.lasso.length > 1) {
    ctx.strokeStyle = "#111827";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(state.lasso[0][0], state.lasso[0][1]);
    for (let i = 1; i < state.lasso.length; i++) {
      ctx.lineTo(state.lasso[i][0], state.lasso[i][1]);
    }
    ctx.closePath();
    ctx.stroke();
    ctx.setLineDash([]);
  }
}

/** Ray-casting point-in-polygon test. */
export function pointInPolygon(px: number, py: number, polygon: [number, number][]): boolean {
  let inside = false;
  for (let i = 0, j = polygon.length - 1; i < polygon.length; j = i++) {
    const [xi, yi] = polygon[i];
    const [xj, yj] = polygon[j];
    const crosses =
      yi > py !== yj > py && px < ((xj - xi) * (py - yi)) / (yj - yi) + xi;
    if (crosses) inside = !inside;
  }
  return inside;
}

/**
 * Entities whose plotted positions fall inside the lasso polygon (canvas
 * coordinates). An empty or degenerate lasso selects nothing, which the
 * caller sends as a selection reset.
 */
export function lassoSelect(
  frame: Frame,
  which: "top" | "bottom",
  polygon: [number, number][],
  geom: SimilarityGeometry = DEFAULT_SIMILARITY,
): number[] {
  const layout = frame.layouts[which];
  if (!layout || polygon.length < 3) return [];
  const { x, y } = scales(layout.positions, geom);
  const picked: number[] = [];
  layout.positions.forEach((p, e) => {
    if (pointInPolygon(x(p[0]), y(p[1]), polygon)) picked.push(e);
  });
  return picked;
}
