import type { ControlMessage, Envelope, Frame, Snapshot } from "./types.js";

/**
 * Coalesces the frame stream: whatever arrives between two render ticks,
 * only the newest frame is handed to the renderer, once per tick.
 */
export class FrameCoalescer {
  private pending: Frame | null = null;
  private scheduled = false;

  constructor(
    private schedule: (cb: () => void) => void,
    private render: (frame: Frame) => void,
  ) {}

  push(frame: Frame): void {
    this.pending = frame;
    if (this.scheduled) return;
    this.scheduled = true;
    this.schedule(() => {
      this.scheduled = false;
      if (this.pending) {
        const frame = this.pending;
        this.pending = null;
        this.render(frame);
      }
    });
  }
}

export interface ClientHooks {
  onFrame(frame: Frame): void;
  onSnapshot(snapshot: Snapshot): void;
  onStatus?(text: string): void;
}

/** Thin WebSocket wrapper with backoff reconnect. */
export class DashboardClient {
  private ws: WebSocket | null = null;
  private attempts = 0;
  private closed = false;

  constructor(private url: string, private hooks: ClientHooks) {}

  connect(): void {
    this.ws = new WebSocket(this.url);
    this.ws.onopen = () => {
      this.attempts = 0;
      this.hooks.onStatus?.("connected");
    };
    this.ws.onmessage = (event) => {
      let envelope: Envelope;
      try {
        envelope = JSON.parse(String(event.data));
      } catch {
        return;
      }
      if (envelope.type === "frame") {
        this.hooks.onFrame(envelope.payload as Frame);
      } else if (envelope.type === "snapshot") {
        this.hooks.onSnapshot(envelope.payload as Snapshot);
      }
    };
    this.ws.onclose = () => {
      if (this.closed) return;
      const wait = Math.min(500 * 2 ** this.attempts, 10_000);
      this.attempts += 1;
      this.hooks.onStatus?.(`reconnecting in ${wait} ms`);
      setTimeout(() => this.connect(), wait);
    };
  }

  send(message: ControlMessage): void {
    if (this.ws && this.ws.readyState === WebSocket.OPEN) {
      this.ws.send(JSON.stringify(message));
    }
  }

  close(): void {
    this.closed = true;
    this.ws?.close();
  }
}
