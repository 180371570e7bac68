import { describe, expect, it } from "vitest";

import { comparatorVisible, maskOutline, wipeColumn } from "../src/comparator.js";

describe("comparator", () => {
  it("is only visible once an inpainted image can exist", () => {
    expect(comparatorVisible("Inpainted")).toBe(true);
    expect(comparatorVisible("Scored")).toBe(true);
    for (const state of ["Created", "Generated", "Masked", "Refined"]) {
      expect(comparatorVisible(state)).toBe(false);
    }
  });

  it("slider 0 shows the initial image only, 100 the inpainted only", () => {
    expect(wipeColumn(128, 0)).toBe(0);
    expect(wipeColumn(128, 100)).toBe(128);
    expect(wipeColumn(128, 50)).toBe(64);
    expect(wipeColumn(128, -5)).toBe(0);
    expect(wipeColumn(128, 250)).toBe(128);
  });

  it("outlines the boundary of a filled square", () => {
    const width = 8;
    const height = 8;
    const bits = new Uint8Array(width * height);
    for (let y = 2; y <= 5; y++) {
      for (let x = 2; x <= 5; x++) bits[y * width + x] = 1;
    }
    const outline = maskOutline(bits, width, height);
    let count = 0;
    for (const v of outline) count += v;
    expect(count).toBe(12); // 4x4 square: perimeter minus the 2x2 interior
    expect(outline[3 * width + 3]).toBe(0); // interior pixel not outlined
    expect(outline[2 * width + 2]).toBe(1); // corner is boundary
  });

  it("treats the image border as outside", () => {
    const bits = new Uint8Array(4 * 4).fill(1);
    const outline = maskOutline(bits, 4, 4);
    expect(outline[0]).toBe(1);
    expect(outline[1 * 4 + 1]).toBe(0);
  });
});
