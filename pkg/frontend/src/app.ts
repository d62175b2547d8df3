// Browser entry point: mounts the five view families, connects the
// WebSocket, and re-renders at most one frame per animation tick.

import type { Canvas2D } from "./canvas.js";
import { DashboardClient, FrameCoalescer } from "./client.js";
import {
  initialViewState,
  pauseOrResumeMessage,
  selectMessage,
  setMessage,
  toggleSort,
} from "./state.js";
import type { Frame } from "./types.js";
import { DEFAULT_GEOMETRY, renderBehaviorView, summaryTimeAt } from "./views/behavior.js";
import { renderCausalityTable } from "./views/causality.js";
import { DEFAULT_COMM, drillDownMessage, renderCommViews } from "./views/comm.js";
import { renderControls } from "./views/controls.js";
import { DEFAULT_SIMILARITY, lassoSelect, renderSimilarityView } from "./views/similarity.js";

function canvasContext(id: string, width: number, height: number): Canvas2D {
  const canvas = document.getElementById(id) as HTMLCanvasElement;
  canvas.width = width;
  canvas.height = height;
  return canvas.getContext("2d") as unknown as Canvas2D;
}

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const wsUrl = params.get("ws") ?? `ws://${window.location.hostname}:8765`;

  const geom = DEFAULT_GEOMETRY;
  const behaviorHeight = geom.marginTop + geom.height + 8 + geom.summaryHeight;
  const contexts = {
    top: canvasContext("behavior-top", geom.width, behaviorHeight),
    bottom: canvasContext("behavior-bottom", geom.width, behaviorHeight),
    simTop: canvasContext("similarity-top", DEFAULT_SIMILARITY.size, DEFAULT_SIMILARITY.size),
    simBottom: canvasContext(
      "similarity-bottom",
      DEFAULT_SIMILARITY.size,
      DEFAULT_SIMILARITY.size,
    ),
    comm: canvasContext("comm", 1200, DEFAULT_COMM.size + 60),
  };
  const causalityDiv = document.getElementById("causality")!;
  const controlsDiv = document.getElementById("controls")!;

  let state = initialViewState();
  let latest: Frame | null = null;

  const render = (frame: Frame) => {
    latest = frame;
    renderBehaviorView(contexts.top, frame, "top", geom);
    renderBehaviorView(contexts.bottom, frame, "bottom", geom);
    renderSimilarityView(contexts.simTop, frame, state, "top");
    renderSimilarityView(contexts.simBottom, frame, state, "bottom");
    renderCommViews(contexts.comm, frame, state);
    causalityDiv.innerHTML = renderCausalityTable(frame, state);
    controlsDiv.innerHTML = renderControls(frame);
    wireControls();
  };

  const coalescer = new FrameCoalescer(
    (cb) => window.requestAnimationFrame(() => cb()),
    render,
  );
  const client = new DashboardClient(wsUrl, {
    onFrame: (frame) => coalescer.push(frame),
    onSnapshot: (snapshot) => {
      if (snapshot.frame) coalescer.push(snapshot.frame);
    },
    onStatus: (text) => {
      const el = document.getElementById("status");
      if (el) el.textContent = text;
    },
  });
  client.connect();

  function wireControls(): void {
    document.getElementById("pause-btn")?.addEventListener("click", () => {
      if (latest) client.send(pauseOrResumeMessage(latest.settings.paused));
    });
    controlsDiv.querySelectorAll("select, input").forEach((el) => {
      el.addEventListener("change", () => {
        const key = el.id.replace(/^set-/, "");
        const raw = (el as HTMLInputElement | HTMLSelectElement).value;
        const value = key === "causality_direction" ? raw : Number(raw);
        client.send(setMessage(key, value));
      });
    });
  }

  // causality header sorting
  causalityDiv.addEventListener("click", (event) => {
    const header = (event.target as HTMLElement).closest("th[data-sort]");
    if (!header || !latest) return;
    state = toggleSort(state, header.getAttribute("data-sort") as "granger_p" | "ir" | "vd");
    render(latest);
  });

  // base-time selection on the summary strips
  for (const id of ["behavior-top", "behavior-bottom"]) {
    const canvas = document.getElementById(id) as HTMLCanvasElement;
    canvas.addEventListener("click", (event) => {
      if (!latest) return;
      const rect = canvas.getBoundingClientRect();
      const y = event.clientY - rect.top;
      const stripTop = geom.marginTop + geom.height + 8;
      if (y >= stripTop && y <= stripTop + geom.summaryHeight) {
        client.send(setMessage("base_time", summaryTimeAt(latest, event.clientX - rect.left, geom)));
      }
    });
  }

  // lasso selection on the similarity views
  for (const [id, which] of [
    ["similarity-top", "top"],
    ["similarity-bottom", "bottom"],
  ] as const) {
    const canvas = document.getElementById(id) as HTMLCanvasElement;
    let drawing = false;
    canvas.addEventListener("mousedown", (event) => {
      drawing = true;
      const rect = canvas.getBoundingClientRect();
      state = { ...state, lasso: [[event.clientX - rect.left, event.clientY - rect.top]] };
    });
    canvas.addEventListener("mousemove", (event) => {
      if (!drawing || !latest) return;
      const rect = canvas.getBoundingClientRect();
      state.lasso.push([event.clientX - rect.left, event.clientY - rect.top]);
      renderSimilarityView(
        which === "top" ? contexts.simTop : contexts.simBottom,
        latest,
        state,
        which,
      );
    });
    canvas.addEventListener("mouseup", () => {
      drawing = false;
      if (!latest) return;
      client.send(selectMessage(lassoSelect(latest, which, state.lasso)));
      state = { ...state, lasso: [] };
    });
  }

  // drill into one finer hierarchy level on double-click
  const commCanvas = document.getElementById("comm") as HTMLCanvasElement;
  commCanvas.addEventListener("dblclick", (event) => {
    if (!latest) return;
    const rect = commCanvas.getBoundingClientRect();
    const message = drillDownMessage(
      latest,
      event.clientX - rect.left,
      event.clientY - rect.top,
    );
    if (message) client.send(message);
  });
}

main();
