// Frame pacing for both stages: hold-to-record sampling while teaching,
// continuous evaluation capped at 15 fps with at most one frame in flight
// (new frames are dropped, never queued, while a prediction is pending).

export interface Clock {
  setInterval(fn: () => void, ms: number): number;
  clearInterval(id: number): void;
}

export const MAX_FPS = 15;

export type CaptureMode = "record" | "evaluate";

export class CaptureLoop {
  private timer: number | null = null;
  private inFlight = false;
  private mode: CaptureMode = "evaluate";

  constructor(
    private clock: Clock,
    private emit: (mode: CaptureMode) => void,
    private intervalMs: number = 1000 / MAX_FPS,
  ) {}

  start(mode: CaptureMode): void {
    this.stop();
    this.mode = mode;
    this.inFlight = false;
    this.tick(); // fire immediately, then at the capped rate
    this.timer = this.clock.setInterval(() => this.tick(), this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      this.clock.clearInterval(this.timer);
      this.timer = null;
    }
    this.inFlight = false;
  }

  get running(): boolean {
    return this.timer !== null;
  }

  // A prediction came back; the next tick may send again.
  predictionArrived(): void {
    this.inFlight = false;
  }

  private tick(): void {
    if (this.mode === "evaluate") {
      if (this.inFlight) return; // drop the frame: no queue growth
      this.inFlight = true;
    }
    this.emit(this.mode);
  }
}
