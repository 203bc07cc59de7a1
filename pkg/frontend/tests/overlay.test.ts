import { describe, expect, it } from "vitest";

import { overlayRect } from "../src/overlay.js";

describe("overlay placement", () => {
  it("maps the 640x480 center crop onto the displayed element", () => {
    // 640x480 frame shown at 960x720: scale 1.5
    const rect = overlayRect({ x: 80, y: 0, side: 480 }, 640, 480, 960, 720);
    expect(rect).toEqual({ x: 120, y: 0, w: 720, h: 720 });
  });

  it("stays inside the displayed video for any crop inside the frame", () => {
    const frames: [number, number][] = [
      [640, 480],
      [480, 640],
      [333, 333],
    ];
    for (const [fw, fh] of frames) {
      const side = Math.min(fw, fh);
      const crop = {
        x: Math.floor((fw - side) / 2),
        y: Math.floor((fh - side) / 2),
        side,
      };
      const rect = overlayRect(crop, fw, fh, 800, 600);
      expect(rect.x).toBeGreaterThanOrEqual(0);
      expect(rect.y).toBeGreaterThanOrEqual(0);
      expect(rect.x + rect.w).toBeLessThanOrEqual(800 + 1e-9);
      expect(rect.y + rect.h).toBeLessThanOrEqual(600 + 1e-9);
    }
  });

  it("covers exactly the crop square: nothing outside is ever painted", () => {
    // the canvas is positioned at this rect and clipped by it, so overlay
    // pixels cannot land outside the crop's image
    const crop = { x: 80, y: 0, side: 480 };
    const rect = overlayRect(crop, 640, 480, 640, 480);
    expect(rect).toEqual({ x: 80, y: 0, w: 480, h: 480 });
  });
});
