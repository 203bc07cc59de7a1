// Placement and painting of the saliency overlay. The overlay canvas is
// positioned exactly over the image of the crop square inside the displayed
// video, so pixels outside the crop square are never painted by
// construction.

export interface Rect {
  x: number;
  y: number;
  w: number;
  h: number;
}

export interface CropBox {
  x: number;
  y: number;
  side: number;
}

// Where the source-frame crop square lands inside the video element, which
// displays a frameW x frameH stream at dispW x dispH.
export function overlayRect(
  crop: CropBox,
  frameW: number,
  frameH: number,
  dispW: number,
  dispH: number,
): Rect {
  const sx = dispW / frameW;
  const sy = dispH / frameH;
  return {
    x: crop.x * sx,
    y: crop.y * sy,
    w: crop.side * sx,
    h: crop.side * sy,
  };
}

export function placeOverlay(canvas: HTMLCanvasElement, rect: Rect): void {
  canvas.style.position = "absolute";
  canvas.style.left = `${rect.x}px`;
  canvas.style.top = `${rect.y}px`;
  canvas.style.width = `${rect.w}px`;
  canvas.style.height = `${rect.h}px`;
}

// Draw the RGBA grid at its native resolution; CSS scales it across the
// crop square (the browser's smoothing plays the role of the server-side
// bilinear upsample). Returns false where no 2D context exists (headless
// DOM in tests).
export function paintSaliency(
  canvas: HTMLCanvasElement,
  rgba: Uint8ClampedArray,
  gridW: number,
  gridH: number,
): boolean {
  canvas.width = gridW;
  canvas.height = gridH;
  canvas.dataset.gridW = String(gridW);
  canvas.dataset.gridH = String(gridH);
  const ctx = canvas.getContext("2d");
  if (!ctx || typeof ImageData === "undefined") return false;
  const pixels = new Uint8ClampedArray(rgba.length);
  pixels.set(rgba);
  ctx.putImageData(new ImageData(pixels, gridW, gridH), 0, 0);
  return true;
}
