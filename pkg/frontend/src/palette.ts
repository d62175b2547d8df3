// Shared visual encodings. The categorical palette is the colorblind-safe
// Okabe-Ito set; every view colors cluster i identically.

export const CLUSTER_COLORS = [
  "#E69F00",
  "#56B4E9",
  "#009E73",
  "#F0E442",
  "#0072B2",
  "#D55E00",
  "#CC79A7",
  "#999999",
];

export const CHANGE_POINT_COLOR = "#0d9488"; // teal vertical lines
export const BASE_MARKER_COLOR = "#8b4513"; // brown draggable base-time line
export const DIMMED_COLOR = "#9ca3af"; // unselected entities
export const SIGNIFICANT_BG = "#fff3b0"; // causality-table highlight

export function clusterColor(id: number): string {
  if (id < 0) return DIMMED_COLOR;
  return CLUSTER_COLORS[id % CLUSTER_COLORS.length];
}

function channel(v: number): string {
  const byte = Math.max(0, Math.min(255, Math.round(v)));
  return byte.toString(16).padStart(2, "0");
}

/** Sequential gray: 0 -> white, 1 -> near-black (higher communication). */
export function grayscale(v: number): string {
  const clamped = Math.max(0, Math.min(1, v));
  const level = 255 - Math.round(clamped * 225);
  return `#${channel(level)}${channel(level)}${channel(level)}`;
}

/** Diverging red-blue: -1 -> dark blue, 0 -> white, +1 -> dark red. */
export function divergingRedBlue(v: number): string {
  const clamped = Math.max(-1, Math.min(1, v));
  const mag = Math.abs(clamped);
  const other = 255 - Math.round(mag * 210);
  if (clamped >= 0) {
    return `#${channel(255 - Math.round(mag * 60))}${channel(other)}${channel(other)}`;
  }
  return `#${channel(other)}${channel(other)}${channel(255 - Math.round(mag * 60))}`;
}
