import { describe, expect, it } from "vitest";

import type { ServerMessage } from "../src/protocol.js";
import {
  clearToast,
  initialState,
  reduce,
  selectionAfterClick,
  type AppState,
} from "../src/state.js";

function play(messages: ServerMessage[], from?: AppState): AppState {
  return messages.reduce(reduce, from ?? initialState());
}

const setup: ServerMessage[] = [
  { type: "session_created", labels: [] },
  { type: "label_added", label_id: 0, name: "cup" },
  { type: "label_added", label_id: 1, name: "hand" },
];

describe("state transitions follow server confirmations", () => {
  it("starts connecting and reaches teaching on session_created", () => {
    expect(initialState().stage.kind).toBe("connecting");
    expect(play([setup[0]]).stage.kind).toBe("teaching");
  });

  it("adds panels with zero counts", () => {
    const s = play(setup);
    expect(s.classes.map((c) => [c.id, c.name, c.count])).toEqual([
      [0, "cup", 0],
      [1, "hand", 0],
    ]);
  });

  it("counts samples per confirmation, not per click", () => {
    let s = play(setup);
    for (let i = 1; i <= 10; i++) {
      s = reduce(s, { type: "sample_added", label_id: 0, count: i });
    }
    expect(s.classes[0].count).toBe(10);
    expect(s.classes[1].count).toBe(0);
  });

  it("training progress advances with epochs and ends evaluating", () => {
    let s = play(setup);
    s = reduce(s, { type: "train_progress", epoch: 5, loss: 0.4 });
    expect(s.stage).toEqual({ kind: "training", progress: 0.5 });
    s = reduce(s, {
      type: "trained",
      report: { epoch_losses: [], final_accuracy: 1, train_ms: 1 },
    });
    expect(s.stage.kind).toBe("evaluating");
  });

  it("predictions update confidences, overlay class, and latency", () => {
    let s = play(setup);
    s = reduce(s, {
      type: "prediction",
      scores: [
        { label_id: 0, name: "cup", p: 0.796 },
        { label_id: 1, name: "hand", p: 0.204 },
      ],
      saliency: { h: 5, w: 5, q8: "", crop: { x: 0, y: 0, side: 480 }, class_id: 0 },
      latency: { inference_ms: 10, render_ms: 1, total_ms: 11 },
    });
    expect(s.classes[0].confidence).toBeCloseTo(0.796);
    expect(s.overlayClass).toBe(0);
    expect(s.latency?.total_ms).toBe(11);
  });

  it("reopen returns to teaching with counts intact and bars reset", () => {
    let s = play(setup);
    s = reduce(s, { type: "sample_added", label_id: 1, count: 7 });
    s = reduce(s, { type: "reopened", counts: [0, 7] });
    expect(s.stage.kind).toBe("teaching");
    expect(s.classes[1].count).toBe(7);
    expect(s.classes.every((c) => c.confidence === 0 && !c.selected)).toBe(true);
  });

  it("errors surface verbatim as a toast and change nothing else", () => {
    const before = play(setup);
    const after = reduce(before, {
      type: "error",
      code: "precondition",
      detail: "label 'cup' has no samples",
    });
    expect(after.toast).toBe("precondition: label 'cup' has no samples");
    expect(after.stage).toEqual(before.stage);
    expect(after.classes).toEqual(before.classes);
    expect(clearToast(after).toast).toBeNull();
  });
});

describe("saliency selection rule", () => {
  it("keeps at most one panel selected", () => {
    let s = play(setup);
    s = reduce(s, { type: "class_selected", class_id: 1 });
    expect(s.classes.map((c) => c.selected)).toEqual([false, true]);
    s = reduce(s, { type: "class_selected", class_id: 0 });
    expect(s.classes.map((c) => c.selected)).toEqual([true, false]);
    s = reduce(s, { type: "class_selected", class_id: null });
    expect(s.classes.map((c) => c.selected)).toEqual([false, false]);
  });

  it("clicking the selected panel requests deselection", () => {
    let s = play(setup);
    expect(selectionAfterClick(s, 1)).toBe(1);
    s = reduce(s, { type: "class_selected", class_id: 1 });
    expect(selectionAfterClick(s, 1)).toBeNull();
    expect(selectionAfterClick(s, 0)).toBe(0);
  });
});
