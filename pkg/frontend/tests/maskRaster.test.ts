import { inflateSync } from "node:zlib";
import { describe, expect, it } from "vitest";

import { decodeGrayPng } from "../src/grayPng.js";
import { CanvasMaskState, MaskRaster } from "../src/maskRaster.js";

const inflate = (data: Uint8Array) => new Uint8Array(inflateSync(data));

describe("MaskRaster", () => {
  it("stamps a radius-1 disc as the 5-pixel plus shape", () => {
    const raster = new MaskRaster(9, 9);
    raster.stampDisc(4, 4, 1, 1);
    expect(raster.area()).toBe(5);
    expect(raster.get(4, 4)).toBe(1);
    expect(raster.get(3, 4)).toBe(1);
    expect(raster.get(5, 4)).toBe(1);
    expect(raster.get(4, 3)).toBe(1);
    expect(raster.get(4, 5)).toBe(1);
    expect(raster.get(3, 3)).toBe(0); // diagonal is sqrt(2) > 1
  });

  it("stamps segments by Euclidean distance to the segment", () => {
    const raster = new MaskRaster(12, 9);
    raster.stampSegment(2, 4, 9, 4, 0, 1);
    expect(raster.area()).toBe(8);
    for (let x = 2; x <= 9; x++) expect(raster.get(x, 4)).toBe(1);
  });

  it("clips stamps at the image border", () => {
    const raster = new MaskRaster(8, 8);
    raster.stampDisc(0, 0, 2, 1);
    expect(raster.area()).toBeGreaterThan(0);
    expect(raster.get(0, 0)).toBe(1);
  });

  it("box fill is inclusive and order-insensitive", () => {
    const raster = new MaskRaster(10, 10);
    raster.fillBox(7, 6, 2, 3, 1);
    expect(raster.area()).toBe(6 * 4);
    expect(raster.get(2, 3)).toBe(1);
    expect(raster.get(7, 6)).toBe(1);
  });

  it("eraser stamps zero through the same geometry", () => {
    const raster = new MaskRaster(10, 10);
    raster.fillBox(0, 0, 9, 9, 1);
    raster.stampDisc(5, 5, 2, 0);
    expect(raster.get(5, 5)).toBe(0);
    expect(raster.get(0, 0)).toBe(1);
  });
});

describe("CanvasMaskState", () => {
  it("exports a single-channel 0/255 PNG at exactly the image dimensions", () => {
    const state = new CanvasMaskState(128, 96);
    state.tool = "brush";
    state.brushRadius = 5;
    state.beginStroke(20, 20);
    state.extendStroke(60, 24);
    state.endStroke();
    const decoded = decodeGrayPng(state.exportPng(), inflate);
    expect(decoded.width).toBe(128);
    expect(decoded.height).toBe(96);
    const values = new Set(decoded.gray);
    expect([...values].every((v) => v === 0 || v === 255)).toBe(true);
    expect(values.has(255)).toBe(true);
  });

  it("export matches the raster bit for bit (lossless, no anti-aliasing)", () => {
    const state = new CanvasMaskState(64, 64);
    state.applyBox(10, 10, 40, 30);
    state.tool = "eraser";
    state.brushRadius = 4;
    state.applyPoint(20, 20);
    const decoded = decodeGrayPng(state.exportPng(), inflate);
    for (let i = 0; i < decoded.gray.length; i++) {
      expect(decoded.gray[i]).toBe(state.raster.data[i] ? 255 : 0);
    }
  });

  it("stroke buffer accumulates points until the stroke ends", () => {
    const state = new CanvasMaskState(32, 32);
    state.beginStroke(1, 1);
    state.extendStroke(5, 5);
    state.extendStroke(9, 5);
    expect(state.strokeInProgress).toBe(true);
    const stroke = state.endStroke();
    expect(stroke?.points).toEqual([
      [1, 1],
      [5, 5],
      [9, 5],
    ]);
    expect(stroke?.radius).toBe(8);
    expect(state.strokeInProgress).toBe(false);
  });

  it("clear resets both raster and stroke buffer", () => {
    const state = new CanvasMaskState(16, 16);
    state.beginStroke(4, 4);
    state.clear();
    expect(state.raster.area()).toBe(0);
    expect(state.strokeInProgress).toBe(false);
  });
});
