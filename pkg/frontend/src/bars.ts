// Class panels: sample counter, live confidence bar, saliency marker, and
// the record / select affordances. Rendering is a plain function of state.

import type { AppState, ClassPanel } from "./state.js";

export interface PanelHandlers {
  holdStart(classId: number): void;
  holdEnd(classId: number): void;
  panelClicked(classId: number): void;
}

function panelHtml(panel: ClassPanel, state: AppState): string {
  const pct = Math.round(panel.confidence * 1000) / 10;
  const evaluating = state.stage.kind === "evaluating";
  const isOverlay = state.overlayClass === panel.id;
  const classes = [
    "panel",
    panel.selected ? "selected" : "",
    isOverlay && evaluating ? "overlay-source" : "",
  ]
    .filter(Boolean)
    .join(" ");
  return `
    <div class="${classes}" data-class-id="${panel.id}" data-testid="panel-${panel.id}">
      <div class="panel-head">
        <span class="panel-name">${panel.name}</span>
        <span class="panel-count" data-testid="count-${panel.id}">${panel.count} samples</span>
      </div>
      <div class="bar-track">
        <div class="bar-fill" style="width:${pct}%"></div>
      </div>
      <div class="panel-foot">
        <span class="panel-pct" data-testid="pct-${panel.id}">${pct.toFixed(1)}%</span>
        ${isOverlay && evaluating ? '<span class="overlay-tag">saliency</span>' : ""}
        ${
          state.stage.kind === "teaching"
            ? `<button class="record" data-record="${panel.id}">hold to record</button>`
            : ""
        }
      </div>
    </div>`;
}

export function renderPanels(
  root: HTMLElement,
  state: AppState,
  handlers: PanelHandlers,
): void {
  root.innerHTML = state.classes.map((p) => panelHtml(p, state)).join("");

  for (const button of root.querySelectorAll<HTMLButtonElement>("[data-record]")) {
    const id = Number(button.dataset.record);
    button.addEventListener("pointerdown", (ev) => {
      ev.preventDefault();
      handlers.holdStart(id);
    });
    for (const evName of ["pointerup", "pointerleave", "pointercancel"]) {
      button.addEventListener(evName, () => handlers.holdEnd(id));
    }
  }

  if (state.stage.kind === "evaluating") {
    for (const panel of root.querySelectorAll<HTMLElement>("[data-class-id]")) {
      panel.addEventListener("click", (ev) => {
        if ((ev.target as HTMLElement).closest("[data-record]")) return;
        handlers.panelClicked(Number(panel.dataset.classId));
      });
    }
  }
}
