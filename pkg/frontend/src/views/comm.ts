import type { Canvas2D } from "../canvas.js";
import { CHANGE_POINT_COLOR, clusterColor, divergingRedBlue, grayscale } from "../palette.js";
import type { CommEntry, CommSection, Frame } from "../types.js";
import type { ViewState } from "../state.js";

export interface CommGeometry {
  size: number; // matrix area (square)
  strip: number; // cluster strip thickness
  gap: number; // between matrices
  labelHeight: number;
}

export const DEFAULT_COMM: CommGeometry = { size: 150, strip: 6, gap: 26, labelHeight: 14 };

function toDense(dim: number, entries: CommEntry[]): number[][] {
  const grid: number[][] = Array.from({ length: dim }, () => new Array(dim).fill(0));
  for (const [i, j, w] of entries) grid[i][j] = w;
  return grid;
}

/** Majority cluster ID of the entities inside each group row/column. */
export function groupClusters(comm: CommSection, clusters: number[]): number[] {
  const counts = new Map<number, Map<number, number>>();
  comm.group_of.forEach((g, entity) => {
    const cluster = clusters[entity] ?? -1;
    if (!counts.has(g)) counts.set(g, new Map());
    const inner = counts.get(g)!;
    inner.set(cluster, (inner.get(cluster) ?? 0) + 1);
  });
  const out = new Array(comm.dim).fill(-1);
  counts.forEach((inner, g) => {
    let best = -1;
    let bestCount = -1;
    inner.forEach((count, cluster) => {
      if (count > bestCount || (count === bestCount && cluster < best)) {
        best = cluster;
        bestCount = count;
      }
    });
    out[g] = best;
  });
  return out;
}

function drawMatrix(
  ctx: Canvas2D,
  grid: number[][],
  color: (v: number) => string,
  originX: number,
  originY: number,
  geom: CommGeometry,
  strips: number[] | null,
  label: string,
): void {
  const dim = grid.length;
  const cell = geom.size / Math.max(dim, 1);
  ctx.fillStyle = "#374151";
  ctx.font = "10px sans-serif";
  ctx.fillText(label, originX, originY - 4);
  if (strips) {
    for (let i = 0; i < dim; i++) {
      ctx.fillStyle = clusterColor(strips[i]);
      // top strip (columns) and left strip (rows)
      ctx.fillRect(originX + i * cell, originY - geom.strip - 1, cell, geom.strip);
      ctx.fillRect(originX - geom.strip - 1, originY + i * cell, geom.strip, cell);
    }
  }
  for (let i = 0; i < dim; i++) {
    for (let j = 0; j < dim; j++) {
      ctx.fillStyle = color(grid[i][j]);
      ctx.fillRect(originX + j * cell, originY + i * cell, cell, cell);
    }
  }
  ctx.strokeStyle = "#9ca3af";
  ctx.lineWidth = 1;
  ctx.strokeRect(originX, originY, geom.size, geom.size);
}

/**
 * Communication behavior: the live matrix and the base-time matrix on a
 * sequential gray colormap, then one diff matrix per change point
 * (change-point minus base) on a symmetric red-blue diverging colormap.
 */
export function renderCommViews(
  ctx: Canvas2D,
  frame: Frame,
  state: ViewState,
  geom: CommGeometry = DEFAULT_COMM,
): void {
  const comm = frame.comm;
  const width = comm
    ? (geom.size + geom.gap) * (2 + comm.diffs.length) + geom.gap
    : geom.size * 3;
  const height = geom.size + geom.strip + geom.labelHeight + 24;
  ctx.clearRect(0, 0, width, height);
  if (!comm) {
    ctx.fillStyle = "#9ca3af";
    ctx.fillText("no communication data", 10, 20);
    return;
  }
  const strips = groupClusters(comm, frame.clusters);
  const originY = geom.labelHeight + geom.strip + 4;

  const live = toDense(comm.dim, comm.live.entries);
  const base = toDense(comm.dim, comm.base.entries);
  const grayMax = Math.max(
    1e-12,
    ...live.flat(),
    ...base.flat(),
  );
  const gray = (v: number) => grayscale(v / grayMax);

  let originX = geom.strip + 8;
  drawMatrix(ctx, live, gray, originX, originY, geom, strips, `live t=${comm.live.t}`);
  originX += geom.size + geom.gap;
  drawMatrix(ctx, base, gray, originX, originY, geom, strips, `base t=${comm.base.t}`);

  const globalMax = Math.max(
    1e-12,
    ...comm.diffs.map((d) => Math.max(0, ...d.entries.map(([, , w]) => Math.abs(w)))),
  );
  for (const diff of comm.diffs) {
    originX += geom.size + geom.gap;
    const grid = toDense(comm.dim, diff.entries);
    const localMax = Math.max(1e-12, ...diff.entries.map(([, , w]) => Math.abs(w)));
    const span = state.diffNormalization === "global" ? globalMax : localMax;
    drawMatrix(
      ctx,
      grid,
      (v) => divergingRedBlue(v / span),
      originX,
      originY,
      geom,
      strips,
      `Δ cp ${diff.ordinal} (t=${diff.t})`,
    );
    // ordinal badge in the change-point color, matching the behavior views
    ctx.fillStyle = CHANGE_POINT_COLOR;
    ctx.fillText(String(diff.ordinal), originX + geom.size - 8, originY - 4);
  }
}

/**
 * Hit-test a double-click against the live matrix; returns the control
 * message that drills into one finer hierarchy level, or null outside.
 */
export function drillDownMessage(
  frame: Frame,
  px: number,
  py: number,
  geom: CommGeometry = DEFAULT_COMM,
): { type: "set"; key: string; value: number } | null {
  const comm = frame.comm;
  if (!comm) return null;
  const originX = geom.strip + 8;
  const originY = geom.labelHeight + geom.strip + 4;
  const inside =
    px >= originX &&
    px <= originX + geom.size &&
    py >= originY &&
    py <= originY + geom.size;
  if (!inside) return null;
  const deepest = frame.meta.level_sizes.length - 1;
  if (comm.level >= deepest) return null;
  return { type: "set", key: "aggregation_level", value: comm.level + 1 };
}
