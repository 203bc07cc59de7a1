// Typed view of the session server's WebSocket protocol, plus a small
// wrapper that queues sends until the socket opens and parses replies.

export interface ScoreEntry {
  label_id: number;
  name: string;
  p: number;
}

export interface SaliencyPayload {
  h: number;
  w: number;
  q8: string; // base64 row-major 8-bit grid
  crop: { x: number; y: number; side: number };
  class_id: number;
}

export interface LatencyPayload {
  inference_ms: number;
  render_ms: number;
  total_ms: number;
}

export type ServerMessage =
  | { type: "session_created"; labels: unknown[] }
  | { type: "label_added"; label_id: number; name: string }
  | { type: "sample_added"; label_id: number; count: number }
  | { type: "label_cleared"; label_id: number }
  | { type: "train_progress"; epoch: number; loss: number }
  | { type: "trained"; report: { epoch_losses: number[]; final_accuracy: number; train_ms: number } }
  | {
      type: "prediction";
      scores: ScoreEntry[];
      saliency: SaliencyPayload;
      latency: LatencyPayload;
    }
  | { type: "class_selected"; class_id: number | null }
  | { type: "reopened"; counts: number[] }
  | { type: "saved"; blob: string }
  | { type: "loaded"; labels: { id: number; name: string }[]; counts: number[]; state: string }
  | { type: "error"; code: string; detail: string };

// Structural subset of both the browser WebSocket and the `ws` package's
// client, so tests can supply either (or a fake). Handler parameters are
// `any` because the two implementations disagree on event types.
export interface WireSocket {
  send(data: string): void;
  close(): void;
  /* eslint-disable @typescript-eslint/no-explicit-any */
  onopen: ((ev: any) => void) | null;
  onmessage: ((ev: any) => void) | null;
  onclose: ((ev: any) => void) | null;
  onerror: ((ev: any) => void) | null;
  /* eslint-enable @typescript-eslint/no-explicit-any */
}

export class TeachSocket {
  private pending: string[] = [];
  private open = false;

  constructor(
    private socket: WireSocket,
    onMessage: (msg: ServerMessage) => void,
    onDown?: () => void,
  ) {
    socket.onopen = () => {
      this.open = true;
      for (const text of this.pending) socket.send(text);
      this.pending = [];
    };
    socket.onmessage = (ev) => {
      onMessage(JSON.parse(String(ev.data)) as ServerMessage);
    };
    socket.onclose = () => onDown?.();
    socket.onerror = () => onDown?.();
  }

  private send(msg: Record<string, unknown>): void {
    const text = JSON.stringify(msg);
    if (this.open) this.socket.send(text);
    else this.pending.push(text);
  }

  createSession(seed = 0): void {
    this.send({ type: "create_session", seed });
  }

  addLabel(name: string): void {
    this.send({ type: "add_label", name });
  }

  addSample(labelId: number, frameB64: string): void {
    this.send({ type: "add_sample", label_id: labelId, frame: frameB64 });
  }

  train(): void {
    this.send({ type: "train" });
  }

  frame(frameB64: string): void {
    this.send({ type: "frame", frame: frameB64 });
  }

  selectClass(classId: number | null): void {
    this.send({ type: "select_class", class_id: classId });
  }

  reopen(): void {
    this.send({ type: "reopen" });
  }

  close(): void {
    this.socket.close();
  }
}
