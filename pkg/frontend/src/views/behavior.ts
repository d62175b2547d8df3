import type { Canvas2D } from "../canvas.js";
import {
  BASE_MARKER_COLOR,
  CHANGE_POINT_COLOR,
  DIMMED_COLOR,
  clusterColor,
} from "../palette.js";
import { extent, linearScale, matrixExtent } from "../scale.js";
import type { Frame } from "../types.js";

export interface BehaviorGeometry {
  width: number;
  height: number; // polyline chart height
  summaryHeight: number; // history strip below the chart
  marginLeft: number;
  marginTop: number;
}

export const DEFAULT_GEOMETRY: BehaviorGeometry = {
  width: 640,
  height: 180,
  summaryHeight: 46,
  marginLeft: 42,
  marginTop: 18,
};

/**
 * One performance behavior view: n polylines over the sliding window,
 * colored by cluster ID, with teal change-point lines and the summary
 * strip (full-history mean) underneath carrying the brown base-time
 * marker. With an active selection, unselected entities fade to gray.
 */
export function renderBehaviorView(
  ctx: Canvas2D,
  frame: Frame,
  which: "top" | "bottom",
  geom: BehaviorGeometry = DEFAULT_GEOMETRY,
): void {
  const block = frame.window[which];
  const metricName = frame.meta.metrics[block.metric] ?? `metric ${block.metric}`;
  const { width, height, summaryHeight, marginLeft, marginTop } = geom;
  const plotW = width - marginLeft - 8;
  const totalHeight = marginTop + height + 8 + summaryHeight;

  ctx.clearRect(0, 0, width, totalHeight);
  ctx.font = "11px sans-serif";
  ctx.textAlign = "left";
  ctx.textBaseline = "alphabetic";

  const x = linearScale(extent(block.times), [marginLeft, marginLeft + plotW]);
  const y = linearScale(matrixExtent(block.values), [marginTop + height, marginTop]);

  // frame + metric label
  ctx.strokeStyle = "#d1d5db";
  ctx.lineWidth = 1;
  ctx.strokeRect(marginLeft, marginTop, plotW, height);
  ctx.fillStyle = "#374151";
  ctx.fillText(metricName, marginLeft, marginTop - 6);

  const selection = new Set(frame.settings.selection);
  const dimming = selection.size > 0;

  const drawLine = (entity: number) => {
    const series = block.values[entity];
    ctx.beginPath();
    ctx.moveTo(x(block.times[0]), y(series[0]));
    for (let i = 1; i < series.length; i++) {
      ctx.lineTo(x(block.times[i]), y(series[i]));
    }
    ctx.stroke();
  };

  // dimmed pass first so highlighted lines draw on top
  if (dimming) {
    ctx.strokeStyle = DIMMED_COLOR;
    ctx.globalAlpha = 0.25;
    ctx.lineWidth = 1;
    for (let e = 0; e < block.values.length; e++) {
      if (!selection.has(e)) drawLine(e);
    }
    ctx.globalAlpha = 1;
  }
  ctx.lineWidth = 1;
  for (let e = 0; e < block.values.length; e++) {
    if (dimming && !selection.has(e)) continue;
    ctx.strokeStyle = clusterColor(frame.clusters[e] ?? -1);
    drawLine(e);
  }

  // change points for the metric shown in this view
  const windowStart = block.times[0];
  const windowEnd = block.times[block.times.length - 1];
  const inWindow = frame.change_points.filter(
    (cp) => cp.metric === block.metric && cp.t >= windowStart && cp.t <= windowEnd,
  );
  if (inWindow.length) {
    ctx.strokeStyle = CHANGE_POINT_COLOR;
    ctx.fillStyle = CHANGE_POINT_COLOR;
    ctx.lineWidth = 1.5;
    for (const cp of inWindow) {
      const cx = x(cp.t);
      ctx.beginPath();
      ctx.moveTo(cx, marginTop);
      ctx.lineTo(cx, marginTop + height);
      ctx.stroke();
      ctx.fillText(String(cp.ordinal), cx + 2, marginTop + 10);
    }
  }

  renderLegend(ctx, frame, geom);
  renderSummaryStrip(ctx, frame, which, geom);
}

function renderLegend(ctx: Canvas2D, frame: Frame, geom: BehaviorGeometry): void {
  // "Cluster-i (count)" chips, shared palette across every view
  let cx = geom.marginLeft + 120;
  const cy = geom.marginTop - 14;
  ctx.font = "10px sans-serif";
  frame.cluster_sizes.forEach((size, id) => {
    ctx.fillStyle = clusterColor(id);
    ctx.fillRect(cx, cy, 8, 8);
    ctx.fillStyle = "#374151";
    ctx.fillText(`Cluster-${id} (${size})`, cx + 11, cy + 8);
    cx += 86;
  });
}

function renderSummaryStrip(
  ctx: Canvas2D,
  frame: Frame,
  which: "top" | "bottom",
  geom: BehaviorGeometry,
): void {
  const times = frame.summary.times;
  const series = frame.summary[which];
  const top = geom.marginTop + geom.height + 8;
  const plotW = geom.width - geom.marginLeft - 8;
  const x = linearScale(extent(times), [geom.marginLeft, geom.marginLeft + plotW]);
  const y = linearScale(extent(series), [top + geom.summaryHeight, top]);

  ctx.strokeStyle = "#d1d5db";
  ctx.lineWidth = 1;
  ctx.strokeRect(geom.marginLeft, top, plotW, geom.summaryHeight);

  ctx.strokeStyle = "#6b7280";
  ctx.beginPath();
  ctx.moveTo(x(times[0]), y(series[0]));
  for (let i = 1; i < series.length; i++) {
    ctx.lineTo(x(times[i]), y(series[i]));
  }
  ctx.stroke();

  // change points reappear in the history strip
  const block = frame.window[which];
  const cps = frame.change_points.filter((cp) => cp.metric === block.metric);
  if (cps.length) {
    ctx.strokeStyle = CHANGE_POINT_COLOR;
    ctx.lineWidth = 1;
    for (const cp of cps) {
      const cx = x(cp.t);
      ctx.beginPath();
      ctx.moveTo(cx, top);
      ctx.lineTo(cx, top + geom.summaryHeight);
      ctx.stroke();
    }
  }

  // draggable base-time marker (brown)
  const bx = x(frame.settings.base_time);
  ctx.strokeStyle = BASE_MARKER_COLOR;
  ctx.lineWidth = 2;
  ctx.beginPath();
  ctx.moveTo(bx, top);
  ctx.lineTo(bx, top + geom.summaryHeight);
  ctx.stroke();
}

/** Map a click x-position in the summary strip back to a time index. */
export function summaryTimeAt(
  frame: Frame,
  px: number,
  geom: BehaviorGeometry = DEFAULT_GEOMETRY,
): number {
  const times = frame.summary.times;
  const plotW = geom.width - geom.marginLeft - 8;
  const [t0, t1] = extent(times);
  const frac = Math.max(0, Math.min(1, (px - geom.marginLeft) / plotW));
  return Math.round(t0 + frac * (t1 - t0));
}
