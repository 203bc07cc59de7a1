// Wires socket, camera, capture loop, and rendering into the two-stage
// interface: teach (record samples per class), then evaluate (live
// confidence bars plus a clickable saliency overlay on the video).

import { renderPanels } from "./bars.js";
import type { FrameSource } from "./camera.js";
import { CaptureLoop, type Clock } from "./capture.js";
import { colorizeQ8, decodeQ8, parseColormap } from "./colormap.js";
import { overlayRect, paintSaliency, placeOverlay } from "./overlay.js";
import { TeachSocket, type ServerMessage, type WireSocket } from "./protocol.js";
import {
  clearToast,
  initialState,
  reduce,
  selectionAfterClick,
  type AppState,
} from "./state.js";

export interface AppDeps {
  connect(): WireSocket;
  openCamera(): Promise<FrameSource>;
  colormapCsv(): Promise<string>;
  clock: Clock;
  frameIntervalMs?: number;
  seed?: number;
}

export interface AppApi {
  state(): AppState;
  dispose(): void;
  onChange(listener: (state: AppState) => void): void;
}

const SKELETON = `
  <div class="layout">
    <section class="stage-pane">
      <div class="video-wrap" data-testid="video-wrap">
        <video data-testid="video" autoplay playsinline></video>
        <canvas class="saliency" data-testid="saliency"></canvas>
      </div>
      <div class="status-row">
        <span class="stage-badge" data-testid="stage"></span>
        <span class="latency" data-testid="latency"></span>
      </div>
      <div class="banner hidden" data-testid="banner"></div>
    </section>
    <section class="control-pane">
      <form data-testid="add-class-form">
        <input name="label" placeholder="new class name" autocomplete="off" />
        <button type="submit">add class</button>
      </form>
      <div class="panels" data-testid="panels"></div>
      <div class="actions">
        <button data-testid="train" class="hidden">train</button>
        <button data-testid="reopen" class="hidden">back to teaching</button>
        <progress data-testid="train-progress" class="hidden" max="1"></progress>
      </div>
      <div class="toast hidden" data-testid="toast"></div>
    </section>
  </div>`;

export function createApp(root: HTMLElement, deps: AppDeps): AppApi {
  root.innerHTML = SKELETON;
  const el = <T extends HTMLElement>(testid: string): T =>
    root.querySelector(`[data-testid="${testid}"]`) as T;

  const video = el<HTMLVideoElement>("video");
  const saliencyCanvas = el<HTMLCanvasElement>("saliency");
  const videoWrap = el<HTMLElement>("video-wrap");
  const panelsRoot = el<HTMLElement>("panels");

  let state = initialState();
  let camera: FrameSource | null = null;
  let colormap: Uint8Array | null = null;
  let holdingClass: number | null = null;
  let disposed = false;
  const listeners: ((s: AppState) => void)[] = [];
  let toastTimer: number | null = null;

  function endHold(): void {
    holdingClass = null;
    if (state.stage.kind === "teaching") loop.stop();
  }

  // Panels re-render while samples stream in, which can swallow the
  // button's own pointerup; the document always sees the release.
  const doc = root.ownerDocument;
  doc.addEventListener("pointerup", endHold);
  doc.addEventListener("pointercancel", endHold);

  const socket = new TeachSocket(
    deps.connect(),
    (msg) => handleServer(msg),
    () => showBanner("connection lost; reload to reconnect"),
  );
  socket.createSession(deps.seed ?? 0);

  const loop = new CaptureLoop(
    deps.clock,
    (mode) => {
      const frame = camera?.grab();
      if (frame == null) {
        if (mode === "evaluate") loop.predictionArrived();
        return;
      }
      if (mode === "record" && holdingClass !== null) {
        socket.addSample(holdingClass, frame);
      } else if (mode === "evaluate") {
        socket.frame(frame);
      }
    },
    deps.frameIntervalMs,
  );

  void deps.colormapCsv().then((text) => {
    colormap = parseColormap(text);
  });
  void deps
    .openCamera()
    .then((source) => {
      camera = source;
      source.attach(video);
      hideBanner();
    })
    .catch((err) => showBanner(`camera unavailable: ${err}`, true));

  function setState(next: AppState): void {
    const stageChanged = next.stage.kind !== state.stage.kind;
    state = next;
    if (stageChanged) onStageChange();
    render();
    for (const fn of listeners) fn(state);
  }

  function handleServer(msg: ServerMessage): void {
    if (msg.type === "prediction") {
      loop.predictionArrived();
      drawSaliency(msg.saliency);
    }
    const next = reduce(state, msg);
    if (msg.type === "error") scheduleToastClear();
    setState(next);
  }

  function onStageChange(): void {
    if (state.stage.kind === "evaluating") {
      loop.start("evaluate");
    } else {
      loop.stop();
      saliencyCanvas.classList.add("hidden");
    }
  }

  function drawSaliency(payload: {
    h: number;
    w: number;
    q8: string;
    crop: { x: number; y: number; side: number };
    class_id: number;
  }): void {
    if (!colormap || !camera) return;
    const rgba = colorizeQ8(decodeQ8(payload.q8), colormap);
    paintSaliency(saliencyCanvas, rgba, payload.w, payload.h);
    const dispW = videoWrap.clientWidth || camera.width;
    const dispH = videoWrap.clientHeight || camera.height;
    placeOverlay(
      saliencyCanvas,
      overlayRect(payload.crop, camera.width, camera.height, dispW, dispH),
    );
    saliencyCanvas.dataset.classId = String(payload.class_id);
    saliencyCanvas.classList.remove("hidden");
  }

  function showBanner(text: string, retry = false): void {
    const banner = el<HTMLElement>("banner");
    banner.textContent = text;
    banner.classList.remove("hidden");
    if (retry) {
      const button = banner.ownerDocument.createElement("button");
      button.textContent = "retry";
      button.addEventListener("click", () => {
        banner.classList.add("hidden");
        void deps
          .openCamera()
          .then((source) => {
            camera = source;
            source.attach(video);
            hideBanner();
          })
          .catch((err) => showBanner(`camera unavailable: ${err}`, true));
      });
      banner.append(" ", button);
    }
  }

  function hideBanner(): void {
    el<HTMLElement>("banner").classList.add("hidden");
  }

  function scheduleToastClear(): void {
    if (toastTimer !== null) deps.clock.clearInterval(toastTimer);
    toastTimer = deps.clock.setInterval(() => {
      if (toastTimer !== null) deps.clock.clearInterval(toastTimer);
      toastTimer = null;
      setState(clearToast(state));
    }, 4000);
  }

  function render(): void {
    const stageEl = el<HTMLElement>("stage");
    if (state.stage.kind === "training") {
      stageEl.textContent = `training ${Math.round(state.stage.progress * 100)}%`;
    } else {
      stageEl.textContent = state.stage.kind;
    }

    const latencyEl = el<HTMLElement>("latency");
    latencyEl.textContent = state.latency
      ? `${state.latency.total_ms.toFixed(1)} ms/frame ` +
        `(infer ${state.latency.inference_ms.toFixed(1)}, ` +
        `render ${state.latency.render_ms.toFixed(1)})`
      : "";

    const progress = el<HTMLProgressElement>("train-progress");
    if (state.stage.kind === "training") {
      progress.classList.remove("hidden");
      progress.value = state.stage.progress;
    } else {
      progress.classList.add("hidden");
    }

    el<HTMLButtonElement>("train").classList.toggle(
      "hidden",
      state.stage.kind !== "teaching",
    );
    el<HTMLButtonElement>("reopen").classList.toggle(
      "hidden",
      state.stage.kind !== "evaluating",
    );

    const toast = el<HTMLElement>("toast");
    toast.textContent = state.toast ?? "";
    toast.classList.toggle("hidden", state.toast === null);

    renderPanels(panelsRoot, state, {
      holdStart(classId) {
        if (state.stage.kind !== "teaching") return;
        holdingClass = classId;
        loop.start("record");
      },
      holdEnd() {
        endHold();
      },
      panelClicked(classId) {
        if (state.stage.kind !== "evaluating") return;
        socket.selectClass(selectionAfterClick(state, classId));
      },
    });
  }

  el<HTMLFormElement>("add-class-form").addEventListener("submit", (ev) => {
    ev.preventDefault();
    const input = (ev.target as HTMLFormElement).elements.namedItem(
      "label",
    ) as HTMLInputElement;
    const name = input.value.trim();
    if (name) {
      socket.addLabel(name);
      input.value = "";
    }
  });
  el<HTMLButtonElement>("train").addEventListener("click", () => socket.train());
  el<HTMLButtonElement>("reopen").addEventListener("click", () => socket.reopen());

  render();

  return {
    state: () => state,
    onChange: (fn) => listeners.push(fn),
    dispose() {
      if (disposed) return;
      disposed = true;
      doc.removeEventListener("pointerup", endHold);
      doc.removeEventListener("pointercancel", endHold);
      loop.stop();
      camera?.stop();
      socket.close();
    },
  };
}
