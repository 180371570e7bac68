/**
 * Client-side mask editing over a plain byte buffer, DOM-free so the exact
 * pixels the server will receive are unit-testable.
 *
 * Brushes are hard-edged Euclidean discs: the binary-mask contract allows no
 * anti-aliasing, and softness exists only server-side via feathering.
 */

import { encodeGrayPng } from "./grayPng.js";

export type Tool = "point" | "box" | "brush" | "eraser";

export class MaskRaster {
  readonly width: number;
  readonly height: number;
  readonly data: Uint8Array; // 0 | 1 per pixel, row-major

  constructor(width: number, height: number) {
    if (width < 1 || height < 1) throw new Error("mask dimensions must be >= 1");
    this.width = width;
    this.height = height;
    this.data = new Uint8Array(width * height);
  }

  clear(): void {
    this.data.fill(0);
  }

  get(x: number, y: number): number {
    return this.data[y * this.width + x] ?? 0;
  }

  area(): number {
    let total = 0;
    for (let i = 0; i < this.data.length; i++) total += this.data[i]!;
    return total;
  }

  /** Stamp a disc: every pixel with dx^2 + dy^2 <= r^2 gets ``value``. */
  stampDisc(cx: number, cy: number, radius: number, value: 0 | 1): void {
    const rSq = radius * radius;
    const xLo = Math.max(0, Math.floor(cx - radius));
    const xHi = Math.min(this.width - 1, Math.ceil(cx + radius));
    const yLo = Math.max(0, Math.floor(cy - radius));
    const yHi = Math.min(this.height - 1, Math.ceil(cy + radius));
    for (let y = yLo; y <= yHi; y++) {
      for (let x = xLo; x <= xHi; x++) {
        const dx = x - cx;
        const dy = y - cy;
        if (dx * dx + dy * dy <= rSq) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  /** Stamp every pixel within ``radius`` of segment (a, b), matching the
   * server's polyline rasterization exactly. */
  stampSegment(
    ax: number,
    ay: number,
    bx: number,
    by: number,
    radius: number,
    value: 0 | 1,
  ): void {
    const dx = bx - ax;
    const dy = by - ay;
    const lengthSq = dx * dx + dy * dy;
    if (lengthSq === 0) {
      this.stampDisc(ax, ay, radius, value);
      return;
    }
    const rSq = radius * radius;
    const xLo = Math.max(0, Math.floor(Math.min(ax, bx) - radius));
    const xHi = Math.min(this.width - 1, Math.ceil(Math.max(ax, bx) + radius));
    const yLo = Math.max(0, Math.floor(Math.min(ay, by) - radius));
    const yHi = Math.min(this.height - 1, Math.ceil(Math.max(ay, by) + radius));
    for (let y = yLo; y <= yHi; y++) {
      for (let x = xLo; x <= xHi; x++) {
        let t = ((x - ax) * dx + (y - ay) * dy) / lengthSq;
        t = Math.max(0, Math.min(1, t));
        const px = ax + t * dx;
        const py = ay + t * dy;
        const ddx = x - px;
        const ddy = y - py;
        if (ddx * ddx + ddy * ddy <= rSq) {
          this.data[y * this.width + x] = value;
        }
      }
    }
  }

  fillBox(x0: number, y0: number, x1: number, y1: number, value: 0 | 1): void {
    const lo = { x: Math.max(0, Math.min(x0, x1)), y: Math.max(0, Math.min(y0, y1)) };
    const hi = {
      x: Math.min(this.width - 1, Math.max(x0, x1)),
      y: Math.min(this.height - 1, Math.max(y0, y1)),
    };
    for (let y = lo.y; y <= hi.y; y++) {
      for (let x = lo.x; x <= hi.x; x++) {
        this.data[y * this.width + x] = value;
      }
    }
  }

  /** Single-channel bytes with values strictly in {0, 255}. */
  toGrayBytes(): Uint8Array {
    const gray = new Uint8Array(this.data.length);
    for (let i = 0; i < this.data.length; i++) {
      gray[i] = this.data[i] ? 255 : 0;
    }
    return gray;
  }

  equals(other: MaskRaster): boolean {
    if (other.width !== this.width || other.height !== this.height) return false;
    for (let i = 0; i < this.data.length; i++) {
      if (this.data[i] !== other.data[i]) return false;
    }
    return true;
  }
}

export interface Stroke {
  points: Array<[number, number]>;
  radius: number;
}

/**
 * Editing state for the mask canvas: active tool, brush radius, the stroke
 * being drawn, and overlay opacity for rendering. The exported mask is always
 * single-channel 0/255 at exactly the image's pixel dimensions.
 */
export class CanvasMaskState {
  tool: Tool = "brush";
  brushRadius = 8;
  overlayOpacity = 0.5;
  readonly raster: MaskRaster;
  private strokeBuffer: Array<[number, number]> = [];

  constructor(imageWidth: number, imageHeight: number) {
    this.raster = new MaskRaster(imageWidth, imageHeight);
  }

  private get paintValue(): 0 | 1 {
    return this.tool === "eraser" ? 0 : 1;
  }

  /** A point click paints one brush disc (or erases one). */
  applyPoint(x: number, y: number): void {
    this.raster.stampDisc(x, y, this.brushRadius, this.paintValue);
  }

  applyBox(x0: number, y0: number, x1: number, y1: number): void {
    this.raster.fillBox(x0, y0, x1, y1, this.tool === "eraser" ? 0 : 1);
  }

  beginStroke(x: number, y: number): void {
    this.strokeBuffer = [[x, y]];
    this.raster.stampDisc(x, y, this.brushRadius, this.paintValue);
  }

  extendStroke(x: number, y: number): void {
    const last = this.strokeBuffer[this.strokeBuffer.length - 1];
    if (!last) {
      this.beginStroke(x, y);
      return;
    }
    this.raster.stampSegment(last[0], last[1], x, y, this.brushRadius, this.paintValue);
    this.strokeBuffer.push([x, y]);
  }

  endStroke(): Stroke | null {
    if (this.strokeBuffer.length === 0) return null;
    const stroke: Stroke = { points: this.strokeBuffer, radius: this.brushRadius };
    this.strokeBuffer = [];
    return stroke;
  }

  get strokeInProgress(): boolean {
    return this.strokeBuffer.length > 0;
  }

  clear(): void {
    this.strokeBuffer = [];
    this.raster.clear();
  }

  /** Lossless export: grayscale PNG, values ⊆ {0, 255}, exact image dims. */
  exportPng(): Uint8Array {
    return encodeGrayPng(this.raster.width, this.raster.height, this.raster.toGrayBytes());
  }
}
