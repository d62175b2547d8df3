import type { ControlMessage } from "./types.js";

// Client-only view state; everything analytic comes from frames.

export interface CausalitySort {
  column: "granger_p" | "ir" | "vd";
  ascending: boolean;
}

export interface ViewState {
  hover: number | null;
  lasso: [number, number][]; // in-progress polygon, canvas coords
  causalitySort: CausalitySort | null;
  diffNormalization: "per-matrix" | "global";
}

export function initialViewState(): ViewState {
  return {
    hover: null,
    lasso: [],
    causalitySort: null,
    diffNormalization: "per-matrix",
  };
}

export function toggleSort(state: ViewState, column: CausalitySort["column"]): ViewState {
  const prev = state.causalitySort;
  const next: CausalitySort =
    prev && prev.column === column
      ? { column, ascending: !prev.ascending }
      : { column, ascending: false }; // first click: descending (largest first)
  return { ...state, causalitySort: next };
}

export function pauseOrResumeMessage(paused: boolean): ControlMessage {
  return paused ? { type: "resume" } : { type: "pause" };
}

export function setMessage(key: string, value: unknown): ControlMessage {
  return { type: "set", key, value };
}

export function selectMessage(entities: number[]): ControlMessage {
  return { type: "select", entities };
}
