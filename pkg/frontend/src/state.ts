// Application state as a pure function of server confirmations. Local
// intent (clicks, holds) only sends messages; the state changes when the
// server answers, so the UI can never show something the server would
// contradict.

import type { LatencyPayload, ScoreEntry, ServerMessage } from "./protocol.js";

export type Stage =
  | { kind: "connecting" }
  | { kind: "teaching" }
  | { kind: "training"; progress: number }
  | { kind: "evaluating" };

export interface ClassPanel {
  id: number;
  name: string;
  count: number;
  confidence: number;
  selected: boolean;
}

export interface AppState {
  stage: Stage;
  classes: ClassPanel[];
  epochs: number;
  overlayClass: number | null;
  latency: LatencyPayload | null;
  toast: string | null;
}

export const TRAIN_EPOCHS = 10;

export function initialState(): AppState {
  return {
    stage: { kind: "connecting" },
    classes: [],
    epochs: TRAIN_EPOCHS,
    overlayClass: null,
    latency: null,
    toast: null,
  };
}

function withScores(classes: ClassPanel[], scores: ScoreEntry[]): ClassPanel[] {
  const byId = new Map(scores.map((s) => [s.label_id, s.p]));
  return classes.map((c) => ({ ...c, confidence: byId.get(c.id) ?? 0 }));
}

export function reduce(state: AppState, msg: ServerMessage): AppState {
  switch (msg.type) {
    case "session_created":
      return { ...state, stage: { kind: "teaching" } };
    case "label_added":
      return {
        ...state,
        classes: [
          ...state.classes,
          {
            id: msg.label_id,
            name: msg.name,
            count: 0,
            confidence: 0,
            selected: false,
          },
        ],
      };
    case "sample_added":
      return {
        ...state,
        classes: state.classes.map((c) =>
          c.id === msg.label_id ? { ...c, count: msg.count } : c,
        ),
      };
    case "label_cleared":
      return {
        ...state,
        classes: state.classes.map((c) =>
          c.id === msg.label_id ? { ...c, count: 0 } : c,
        ),
      };
    case "train_progress":
      return {
        ...state,
        stage: { kind: "training", progress: msg.epoch / state.epochs },
      };
    case "trained":
      return { ...state, stage: { kind: "evaluating" } };
    case "prediction":
      return {
        ...state,
        classes: withScores(state.classes, msg.scores),
        overlayClass: msg.saliency.class_id,
        latency: msg.latency,
      };
    case "class_selected":
      return {
        ...state,
        classes: state.classes.map((c) => ({
          ...c,
          selected: c.id === msg.class_id,
        })),
      };
    case "reopened":
      return {
        ...state,
        stage: { kind: "teaching" },
        overlayClass: null,
        latency: null,
        classes: state.classes.map((c, i) => ({
          ...c,
          count: msg.counts[i] ?? c.count,
          confidence: 0,
          selected: false,
        })),
      };
    case "error":
      return { ...state, toast: `${msg.code}: ${msg.detail}` };
    default:
      return state;
  }
}

export function clearToast(state: AppState): AppState {
  return state.toast === null ? state : { ...state, toast: null };
}

// The class whose saliency a click should request: clicking the selected
// panel deselects (server falls back to the top class).
export function selectionAfterClick(
  state: AppState,
  classId: number,
): number | null {
  const current = state.classes.find((c) => c.selected);
  return current && current.id === classId ? null : classId;
}
