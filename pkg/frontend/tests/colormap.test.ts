import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

import { describe, expect, it } from "vitest";

import {
  A_MAX,
  colorizeQ8,
  decodeQ8,
  parseColormap,
  roundHalfEven,
} from "../src/colormap.js";

const here = dirname(fileURLToPath(import.meta.url));
// the canonical table lives in the server package; the bundle ships a copy
const canonicalCsv = readFileSync(
  join(here, "..", "..", "src", "salient_teach", "assets", "colormap_bgyr_256.csv"),
  "utf-8",
);

describe("shared colormap table", () => {
  it("parses 256 rows with the documented anchor colors", () => {
    const table = parseColormap(canonicalCsv);
    expect(table.length).toBe(256 * 3);
    expect([...table.slice(0, 3)]).toEqual([0, 0, 255]); // cold end: blue
    expect([...table.slice(85 * 3, 85 * 3 + 3)]).toEqual([0, 255, 0]);
    expect([...table.slice(170 * 3, 170 * 3 + 3)]).toEqual([255, 255, 0]);
    expect([...table.slice(255 * 3)]).toEqual([255, 0, 0]); // hot end: red
  });

  it("rejects truncated tables", () => {
    expect(() => parseColormap("r,g,b\n0,0,255\n")).toThrow(/256 rows/);
  });

  it("rounds half to even like the server", () => {
    expect(roundHalfEven(0.5)).toBe(0);
    expect(roundHalfEven(1.5)).toBe(2);
    expect(roundHalfEven(2.5)).toBe(2);
    expect(roundHalfEven(2.4)).toBe(2);
    expect(roundHalfEven(2.6)).toBe(3);
  });
});

describe("client colorization matches the server pipeline byte for byte", () => {
  it("reproduces the server-rendered RGBA for every 8-bit value", () => {
    const expected: number[][] = JSON.parse(
      readFileSync(join(here, "fixtures", "colormap_rgba.json"), "utf-8"),
    );
    const table = parseColormap(canonicalCsv);
    const everyValue = new Uint8Array(256).map((_, i) => i);
    const rgba = colorizeQ8(everyValue, table);
    for (let q = 0; q < 256; q++) {
      const got = [...rgba.slice(q * 4, q * 4 + 4)];
      expect(got, `q8=${q}`).toEqual(expected[q]);
    }
  });

  it("keeps zero salience fully transparent and caps alpha at A_MAX", () => {
    const table = parseColormap(canonicalCsv);
    const rgba = colorizeQ8(new Uint8Array([0, 255]), table);
    expect(rgba[3]).toBe(0);
    expect(rgba[7]).toBe(Math.round(A_MAX * 255));
  });

  it("decodes base64 grids", () => {
    const bytes = decodeQ8(Buffer.from([0, 128, 64, 255]).toString("base64"));
    expect([...bytes]).toEqual([0, 128, 64, 255]);
  });
});
