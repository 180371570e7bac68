/** Pure helpers for the before/after slider-wipe comparison. */

/** The comparator only makes sense once an inpainted image exists. */
export function comparatorVisible(state: string): boolean {
  return state === "Inpainted" || state === "Scored";
}

/**
 * Pixel column of the wipe for a slider position in [0, 100]:
 * 0 shows the initial image only, 100 the inpainted image only.
 */
export function wipeColumn(imageWidth: number, sliderPercent: number): number {
  const clamped = Math.max(0, Math.min(100, sliderPercent));
  return Math.round((imageWidth * clamped) / 100);
}

/**
 * Boundary pixels of a 0/1 mask: set pixels with at least one 4-neighbor
 * outside the mask (image border counts as outside). Used for the overlay
 * outline toggle.
 */
export function maskOutline(bits: Uint8Array, width: number, height: number): Uint8Array {
  const outline = new Uint8Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      if (!bits[y * width + x]) continue;
      const left = x > 0 ? bits[y * width + x - 1]! : 0;
      const right = x < width - 1 ? bits[y * width + x + 1]! : 0;
      const up = y > 0 ? bits[(y - 1) * width + x]! : 0;
      const down = y < height - 1 ? bits[(y + 1) * width + x]! : 0;
      if (!left || !right || !up || !down) {
        outline[y * width + x] = 1;
      }
    }
  }
  return outline;
}
