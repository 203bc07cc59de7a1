// Client-side colorization of the quantized saliency grid, using the same
// 256-entry blue->green->yellow->red table the server packages (served next
// to this bundle as colormap.csv). For wire values the table is indexed
// directly, and the float math mirrors the server's 64-bit pipeline, so the
// RGBA bytes match the server-rendered overlay exactly at equal
// quantization.

export const A_MAX = 0.6;

export function parseColormap(csvText: string): Uint8Array {
  const lines = csvText.trim().split(/\r?\n/);
  const rows = lines.slice(1); // header: r,g,b
  if (rows.length !== 256) {
    throw new Error(`colormap must have 256 rows, got ${rows.length}`);
  }
  const table = new Uint8Array(256 * 3);
  rows.forEach((row, i) => {
    const parts = row.split(",").map(Number);
    if (parts.length !== 3 || parts.some((v) => !Number.isFinite(v))) {
      throw new Error(`bad colormap row ${i + 1}: ${row}`);
    }
    table.set(parts, i * 3);
  });
  return table;
}

// IEEE round-half-to-even, matching the server's byte quantization.
export function roundHalfEven(x: number): number {
  const floor = Math.floor(x);
  const diff = x - floor;
  if (diff > 0.5) return floor + 1;
  if (diff < 0.5) return floor;
  return floor % 2 === 0 ? floor : floor + 1;
}

// Map 8-bit saliency values to RGBA bytes: color from the shared table,
// alpha ramping linearly from transparent (0) to A_MAX at full salience.
export function colorizeQ8(q8: Uint8Array, table: Uint8Array): Uint8ClampedArray {
  const out = new Uint8ClampedArray(q8.length * 4);
  for (let i = 0; i < q8.length; i++) {
    const q = q8[i];
    out[i * 4] = table[q * 3];
    out[i * 4 + 1] = table[q * 3 + 1];
    out[i * 4 + 2] = table[q * 3 + 2];
    out[i * 4 + 3] = roundHalfEven(A_MAX * (q / 255) * 255);
  }
  return out;
}

export function decodeQ8(base64: string): Uint8Array {
  if (typeof atob === "function") {
    const binary = atob(base64);
    const bytes = new Uint8Array(binary.length);
    for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
    return bytes;
  }
  // node (tests) has Buffer instead of atob
  const buffer = (
    globalThis as { Buffer?: { from(s: string, enc: string): Uint8Array } }
  ).Buffer;
  if (!buffer) throw new Error("no base64 decoder available");
  return new Uint8Array(buffer.from(base64, "base64"));
}
