import { SIGNIFICANT_BG } from "../palette.js";
import type { CausalityReport, CausalityRow, Frame } from "../types.js";
import type { CausalitySort, ViewState } from "../state.js";

// Rendered as an HTML string: a small sortable table. Rows whose Granger
// p-value clears the threshold get the yellow highlight; clicking a
// numeric column header toggles descending/ascending sort.

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function sortRows(rows: CausalityRow[], sort: CausalitySort | null): CausalityRow[] {
  if (!sort) return rows.slice();
  const signed = sort.ascending ? 1 : -1;
  return rows
    .slice()
    .sort((a, b) => signed * (a[sort.column] - b[sort.column]) || a.metric - b.metric);
}

function formatP(p: number): string {
  if (p < 1e-4) return p.toExponential(1);
  return p.toFixed(4);
}

export function renderCausalityTable(frame: Frame, state: ViewState): string {
  const report: CausalityReport | null = frame.causality;
  if (!report) {
    return '<div class="causality empty">causality: waiting for enough history</div>';
  }
  const target = frame.meta.metrics[report.target] ?? `metric ${report.target}`;
  const heading =
    report.direction === "from"
      ? `What drives ${esc(target)}?`
      : `What does ${esc(target)} drive?`;
  const arrow = (column: CausalitySort["column"]): string => {
    if (!state.causalitySort || state.causalitySort.column !== column) return "";
    return state.causalitySort.ascending ? " ▲" : " ▼";
  };
  const rows = sortRows(report.rows, state.causalitySort)
    .map((row) => {
      const name = frame.meta.metrics[row.metric] ?? `metric ${row.metric}`;
      const style = row.significant ? ` style="background:${SIGNIFICANT_BG}"` : "";
      return (
        `<tr data-metric="${row.metric}"${style}>` +
        `<td>${esc(name)}</td>` +
        `<td>${formatP(row.granger_p)}</td>` +
        `<td>${row.ir.toFixed(3)}</td>` +
        `<td>${row.vd.toFixed(3)}</td>` +
        `</tr>`
      );
    })
    .join("");
  const stale =
    report.staleness > 0 ? `<span class="stale">fit ${report.staleness} ticks old</span>` : "";
  return (
    `<div class="causality"><h3>${heading} ${stale}</h3>` +
    `<table><thead><tr>` +
    `<th>metric</th>` +
    `<th data-sort="granger_p">p${arrow("granger_p")}</th>` +
    `<th data-sort="ir">IR${arrow("ir")}</th>` +
    `<th data-sort="vd">VD${arrow("vd")}</th>` +
    `</tr></thead><tbody>${rows}</tbody></table></div>`
  );
}
