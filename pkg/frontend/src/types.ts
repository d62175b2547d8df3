// Wire schema of the analysis stream, mirrored from the server.

export interface Envelope {
  type: "frame" | "snapshot" | "ack" | "error";
  payload: unknown;
}

export interface FrameMeta {
  n: number;
  metrics: string[];
  level_sizes: number[];
  window_capacity: number;
}

export interface FrameSettings {
  top_metric: number;
  bottom_metric: number;
  cluster_metric: number;
  k: number;
  alpha: number;
  base_time: number;
  aggregation_level: number;
  causality_direction: "from" | "to";
  selection: number[];
  paused: boolean;
}

export interface WindowBlock {
  metric: number;
  times: number[];
  values: number[][]; // n rows, one series per entity
}

export interface ChangePoint {
  metric: number;
  t: number;
  ordinal: number;
}

export interface LayoutBlock {
  epoch: number;
  positions: [number, number][];
  processed: number;
  reset: boolean;
}

export interface CausalityRow {
  metric: number;
  granger_p: number;
  significant: boolean;
  ir: number;
  vd: number;
}

export interface CausalityReport {
  target: number;
  direction: "from" | "to";
  staleness: number;
  rows: CausalityRow[];
  p_threshold: number;
  fit: { s: number; fit_ms: number; refits: number; ridge: boolean };
}

export type CommEntry = [number, number, number]; // row, col, weight

export interface CommMatrix {
  t: number;
  entries: CommEntry[];
}

export interface DiffMatrix extends CommMatrix {
  ordinal: number;
}

export interface CommSection {
  level: number;
  dim: number;
  group_of: number[];
  live: CommMatrix;
  base: CommMatrix;
  diffs: DiffMatrix[];
}

export interface Freshness {
  fresh: boolean;
  age: number;
}

export interface Frame {
  t: number;
  meta: FrameMeta;
  settings: FrameSettings;
  window: { top: WindowBlock; bottom: WindowBlock };
  summary: { times: number[]; top: number[]; bottom: number[] };
  change_points: ChangePoint[];
  clusters: number[];
  cluster_sizes: number[];
  layouts: { top: LayoutBlock | null; bottom: LayoutBlock | null };
  causality: CausalityReport | null;
  comm: CommSection | null;
  freshness: Record<string, Freshness>;
  diagnostics: Record<string, number | boolean>;
}

export interface Snapshot {
  session: Record<string, unknown>;
  frame: Frame | null;
}

export type ControlMessage =
  | { type: "pause" }
  | { type: "resume" }
  | { type: "set"; key: string; value: unknown }
  | { type: "select"; entities: number[] };

export interface Transport {
  send(message: ControlMessage): void;
}
