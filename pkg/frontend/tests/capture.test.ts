import { describe, expect, it } from "vitest";

import { CaptureLoop, MAX_FPS, type Clock } from "../src/capture.js";

// Deterministic clock: intervals fire only when the test advances time.
class ManualClock implements Clock {
  private intervals = new Map<number, { fn: () => void; ms: number; next: number }>();
  private now = 0;
  private nextId = 1;

  setInterval(fn: () => void, ms: number): number {
    const id = this.nextId++;
    this.intervals.set(id, { fn, ms, next: this.now + ms });
    return id;
  }

  clearInterval(id: number): void {
    this.intervals.delete(id);
  }

  advance(ms: number): void {
    const target = this.now + ms;
    for (;;) {
      let soonest: { id: number; at: number } | null = null;
      for (const [id, itv] of this.intervals) {
        if (itv.next <= target && (!soonest || itv.next < soonest.at)) {
          soonest = { id, at: itv.next };
        }
      }
      if (!soonest) break;
      const itv = this.intervals.get(soonest.id)!;
      this.now = itv.next;
      itv.next += itv.ms;
      itv.fn();
    }
    this.now = target;
  }
}

describe("evaluation capture", () => {
  it("caps the send rate at 15 fps", () => {
    const clock = new ManualClock();
    let sent = 0;
    const loop = new CaptureLoop(clock, () => {
      sent++;
      loop.predictionArrived(); // server replies instantly
    });
    loop.start("evaluate");
    clock.advance(1000);
    // one immediate frame plus 15 ticks in the first second
    expect(sent).toBeLessThanOrEqual(MAX_FPS + 1);
    expect(sent).toBeGreaterThanOrEqual(MAX_FPS);
  });

  it("keeps at most one frame in flight and drops the rest", () => {
    const clock = new ManualClock();
    let sent = 0;
    const loop = new CaptureLoop(clock, () => sent++);
    loop.start("evaluate");
    clock.advance(2000); // no predictionArrived: server is slow
    expect(sent).toBe(1);

    loop.predictionArrived();
    clock.advance(1000);
    expect(sent).toBe(2); // exactly one more, not a burst of queued frames
  });

  it("resumes full rate once predictions flow again", () => {
    const clock = new ManualClock();
    let sent = 0;
    const loop = new CaptureLoop(clock, () => {
      sent++;
      loop.predictionArrived();
    });
    loop.start("evaluate");
    clock.advance(500);
    const before = sent;
    clock.advance(500);
    expect(sent - before).toBeGreaterThanOrEqual(7); // ~15fps continues
  });
});

describe("hold-to-record capture", () => {
  it("sends samples only while running and stops cleanly", () => {
    const clock = new ManualClock();
    const modes: string[] = [];
    const loop = new CaptureLoop(clock, (mode) => modes.push(mode));
    loop.start("record");
    clock.advance(200); // immediate + 3 ticks at 66.7ms
    loop.stop();
    clock.advance(1000);
    expect(modes.length).toBe(4);
    expect(modes.every((m) => m === "record")).toBe(true);
    expect(loop.running).toBe(false);
  });

  it("recording is not gated by predictions", () => {
    const clock = new ManualClock();
    let sent = 0;
    const loop = new CaptureLoop(clock, () => sent++); // never acknowledge
    loop.start("record");
    clock.advance(1000);
    expect(sent).toBeGreaterThanOrEqual(MAX_FPS);
  });
});
