import type { Frame } from "../types.js";

// Settings bar: pause/resume plus the drop-downs that map one-to-one
// onto server settings. Rendered as an HTML string; the app wires the
// change events to `setMessage`/`pauseOrResumeMessage`.

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function metricOptions(metrics: string[], chosen: number): string {
  return metrics
    .map((m, i) => `<option value="${i}"${i === chosen ? " selected" : ""}>${esc(m)}</option>`)
    .join("");
}

export function renderControls(frame: Frame | null): string {
  if (!frame) {
    return '<div class="controls">waiting for stream…</div>';
  }
  const s = frame.settings;
  const metrics = frame.meta.metrics;
  const kOptions = [2, 3, 4, 5, 6, 7, 8]
    .map((k) => `<option value="${k}"${k === s.k ? " selected" : ""}>${k}</option>`)
    .join("");
  const levelOptions = frame.meta.level_sizes
    .map(
      (count, level) =>
        `<option value="${level}"${level === s.aggregation_level ? " selected" : ""}>` +
        `level ${level} (${count})</option>`,
    )
    .join("");
  const directionOptions = (["from", "to"] as const)
    .map(
      (d) =>
        `<option value="${d}"${d === s.causality_direction ? " selected" : ""}>${d}-causality</option>`,
    )
    .join("");
  return (
    `<div class="controls">` +
    `<button id="pause-btn">${s.paused ? "resume" : "pause"}</button>` +
    `<label>top <select id="set-top_metric">${metricOptions(metrics, s.top_metric)}</select></label>` +
    `<label>bottom <select id="set-bottom_metric">${metricOptions(metrics, s.bottom_metric)}</select></label>` +
    `<label>cluster by <select id="set-cluster_metric">${metricOptions(metrics, s.cluster_metric)}</select></label>` +
    `<label>k <select id="set-k">${kOptions}</select></label>` +
    `<label>alpha <input id="set-alpha" type="number" min="0" max="1" step="0.001" value="${s.alpha}"></label>` +
    `<label>comm <select id="set-aggregation_level">${levelOptions}</select></label>` +
    `<label>direction <select id="set-causality_direction">${directionOptions}</select></label>` +
    `<span class="t">t=${frame.t}${s.paused ? " (paused)" : ""}</span>` +
    `</div>`
  );
}
