import { describe, expect, it } from "vitest";

import { FrameCoalescer } from "../src/client.js";
import {
  initialViewState,
  pauseOrResumeMessage,
  selectMessage,
  setMessage,
} from "../src/state.js";
import type { ControlMessage, Frame, Transport } from "../src/types.js";
import { drillDownMessage } from "../src/views/comm.js";
import { lassoSelect, pointInPolygon } from "../src/views/similarity.js";
import { fixtureFrame } from "./fixture.js";

class MockServer implements Transport {
  received: ControlMessage[] = [];

  send(message: ControlMessage): void {
    this.received.push(message);
  }
}

describe("control messages against a mock server", () => {
  it("pause and resume emit the documented messages", () => {
    const server = new MockServer();
    const frame = fixtureFrame();
    server.send(pauseOrResumeMessage(frame.settings.paused));
    frame.settings.paused = true;
    server.send(pauseOrResumeMessage(frame.settings.paused));
    expect(server.received).toEqual([{ type: "pause" }, { type: "resume" }]);
  });

  it("settings changes emit set messages keyed like the server registry", () => {
    const server = new MockServer();
    server.send(setMessage("k", 4));
    server.send(setMessage("base_time", 8));
    server.send(setMessage("causality_direction", "to"));
    expect(server.received).toEqual([
      { type: "set", key: "k", value: 4 },
      { type: "set", key: "base_time", value: 8 },
      { type: "set", key: "causality_direction", value: "to" },
    ]);
  });

  it("lasso around the right-hand cluster selects exactly those entities", () => {
    const server = new MockServer();
    const frame = fixtureFrame();
    // entities 6 and 7 sit at x ~ 4.1-4.4, y ~ -1.5..-1.2 (right edge)
    const polygon: [number, number][] = [
      [170, 120],
      [240, 120],
      [240, 240],
      [170, 240],
    ];
    const picked = lassoSelect(frame, "top", polygon);
    server.send(selectMessage(picked));
    expect(server.received).toEqual([{ type: "select", entities: [6, 7] }]);
  });

  it("an empty lasso clears the selection", () => {
    const server = new MockServer();
    server.send(selectMessage(lassoSelect(fixtureFrame(), "top", [])));
    expect(server.received).toEqual([{ type: "select", entities: [] }]);
  });

  it("double-clicking the live matrix drills one level deeper", () => {
    const frame = fixtureFrame();
    const message = drillDownMessage(frame, 60, 60);
    expect(message).toEqual({ type: "set", key: "aggregation_level", value: 2 });
    // already at the deepest level: no message
    frame.comm!.level = 2;
    expect(drillDownMessage(frame, 60, 60)).toBeNull();
    // outside the live matrix: no message
    frame.comm!.level = 1;
    expect(drillDownMessage(frame, 1000, 60)).toBeNull();
  });
});

describe("geometry helpers", () => {
  it("point-in-polygon handles a simple square", () => {
    const square: [number, number][] = [
      [0, 0],
      [10, 0],
      [10, 10],
      [0, 10],
    ];
    expect(pointInPolygon(5, 5, square)).toBe(true);
    expect(pointInPolygon(15, 5, square)).toBe(false);
  });
});

describe("frame coalescing", () => {
  it("renders only the newest frame once per tick", () => {
    const ticks: Array<() => void> = [];
    const rendered: number[] = [];
    const coalescer = new FrameCoalescer(
      (cb) => ticks.push(cb),
      (frame: Frame) => rendered.push(frame.t),
    );
    const f = (t: number) => ({ ...fixtureFrame(), t });
    coalescer.push(f(1));
    coalescer.push(f(2));
    coalescer.push(f(3));
    expect(ticks).toHaveLength(1);
    ticks.pop()!();
    expect(rendered).toEqual([3]);
    coalescer.push(f(4));
    ticks.pop()!();
    expect(rendered).toEqual([3, 4]);
  });
});

describe("view state", () => {
  it("initial state has no lasso or sort", () => {
    const state = initialViewState();
    expect(state.lasso).toEqual([]);
    expect(state.causalitySort).toBeNull();
    expect(state.diffNormalization).toBe("per-matrix");
  });
});
