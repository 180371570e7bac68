import { inflateSync } from "node:zlib";
import { describe, expect, it } from "vitest";

import { decodeGrayPng, encodeGrayPng } from "../src/grayPng.js";

const inflate = (data: Uint8Array) => new Uint8Array(inflateSync(data));

describe("gray PNG codec", () => {
  it("round-trips arbitrary gray buffers", () => {
    const width = 23;
    const height = 17;
    const gray = new Uint8Array(width * height);
    for (let i = 0; i < gray.length; i++) gray[i] = (i * 37) % 256;
    const png = encodeGrayPng(width, height, gray);
    const decoded = decodeGrayPng(png, inflate);
    expect(decoded.width).toBe(width);
    expect(decoded.height).toBe(height);
    expect(Array.from(decoded.gray)).toEqual(Array.from(gray));
  });

  it("round-trips a 0/255 mask exactly", () => {
    const width = 128;
    const height = 128;
    const gray = new Uint8Array(width * height);
    for (let y = 40; y < 92; y++) {
      for (let x = 8; x < 72; x++) gray[y * width + x] = 255;
    }
    const decoded = decodeGrayPng(encodeGrayPng(width, height, gray), inflate);
    expect(Array.from(new Set(decoded.gray)).sort()).toEqual([0, 255]);
    expect(Buffer.from(decoded.gray).equals(Buffer.from(gray))).toBe(true);
  });

  it("handles buffers larger than one stored deflate block", () => {
    const width = 300;
    const height = 300; // 300*301 raw bytes > 65535, forces multiple blocks
    const gray = new Uint8Array(width * height).fill(255);
    const decoded = decodeGrayPng(encodeGrayPng(width, height, gray), inflate);
    expect(decoded.gray.every((v) => v === 255)).toBe(true);
  });

  it("starts with the PNG signature and rejects non-PNG input", () => {
    const png = encodeGrayPng(4, 4, new Uint8Array(16));
    expect(Array.from(png.subarray(0, 8))).toEqual([137, 80, 78, 71, 13, 10, 26, 10]);
    expect(() => decodeGrayPng(new Uint8Array([1, 2, 3]), inflate)).toThrow(/not a PNG/);
  });

  it("rejects mismatched buffer sizes", () => {
    expect(() => encodeGrayPng(4, 4, new Uint8Array(15))).toThrow(/15 != 4x4/);
  });
});
