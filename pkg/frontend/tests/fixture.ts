import type { Frame } from "../src/types.js";

// Hand-built frame: 8 entities in 2 PE groups, 3 metrics, 3 clusters,
// two change points on the top metric. The first diff matrix belongs to
// the change point the base time sits on, so it is exactly zero.

export function fixtureFrame(): Frame {
  const n = 8;
  const clusters = [0, 0, 0, 1, 1, 1, 2, 2];
  const times = [6, 7, 8, 9, 10];
  const value = (e: number, i: number) => 10 * clusters[e] + e * 0.5 + i;
  const windowValues = Array.from({ length: n }, (_, e) =>
    times.map((_, i) => value(e, i)),
  );
  const positions: [number, number][] = [
    [-4.0, -1.0],
    [-3.5, -0.5],
    [-3.8, 0.2],
    [0.1, 2.2],
    [0.4, 2.0],
    [-0.2, 2.5],
    [4.1, -1.5],
    [4.4, -1.2],
  ];
  return {
    t: 10,
    meta: {
      n,
      metrics: ["Prim.Rb.", "Sec.Rb.", "Net.Send."],
      level_sizes: [1, 2, 8],
      window_capacity: 64,
    },
    settings: {
      top_metric: 1,
      bottom_metric: 2,
      cluster_metric: 1,
      k: 3,
      alpha: 0.01,
      base_time: 8,
      aggregation_level: 1,
      causality_direction: "from",
      selection: [],
      paused: false,
    },
    window: {
      top: { metric: 1, times, values: windowValues },
      bottom: { metric: 2, times, values: windowValues.map((row) => row.map((v) => v * 2)) },
    },
    summary: {
      times: [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
      top: [5, 5.2, 5.1, 5.4, 9.0, 9.2, 9.1, 9.4, 9.3, 9.5, 9.6],
      bottom: [10, 10.1, 10.4, 10.2, 18.1, 18.4, 18.2, 18.6, 18.5, 18.8, 19.0],
    },
    change_points: [
      { metric: 1, t: 4, ordinal: 1 },
      { metric: 1, t: 8, ordinal: 2 },
    ],
    clusters,
    cluster_sizes: [3, 3, 2],
    layouts: {
      top: { epoch: 11, positions, processed: 8, reset: false },
      bottom: {
        epoch: 11,
        positions: positions.map(([x, y]) => [y, x] as [number, number]),
        processed: 8,
        reset: false,
      },
    },
    causality: {
      target: 1,
      direction: "from",
      staleness: 2,
      p_threshold: 0.05,
      fit: { s: 10, fit_ms: 1.5, refits: 2, ridge: false },
      rows: [
        { metric: 0, granger_p: 0.44, significant: false, ir: 0.02, vd: 0.01 },
        { metric: 2, granger_p: 0.004, significant: true, ir: 0.31, vd: 0.22 },
      ],
    },
    comm: {
      level: 1,
      dim: 2,
      group_of: [0, 0, 0, 0, 1, 1, 1, 1],
      live: {
        t: 10,
        entries: [
          [0, 0, 5.0],
          [0, 1, 1.0],
          [1, 1, 3.0],
        ],
      },
      base: {
        t: 8,
        entries: [
          [0, 0, 4.0],
          [1, 0, 0.5],
        ],
      },
      diffs: [
        { t: 8, ordinal: 2, entries: [] }, // base time == this change point
        {
          t: 4,
          ordinal: 1,
          entries: [
            [0, 0, -2.0],
            [0, 1, 1.5],
            [1, 1, 0.8],
          ],
        },
      ],
    },
    freshness: {
      change_detect: { fresh: true, age: 0 },
      clusters: { fresh: true, age: 0 },
      layout_top: { fresh: true, age: 0 },
      layout_bottom: { fresh: true, age: 0 },
      causality: { fresh: true, age: 0 },
      comm: { fresh: true, age: 0 },
    },
    diagnostics: { tick_ms: 12.5, cluster_processed: 8 },
  };
}
