/** Square-brush mask painting at native raster resolution.

The painted bits are exactly what gets uploaded: no resampling or vector
geometry, so the server-side few-shot module consumes the same mask the
responder saw.
*/

import { encodeMaskPgm } from './ppm.js';

export class MaskPainter {
  readonly width: number;
  readonly height: number;
  private bits: Uint8Array;
  private foreground = 0;

  constructor(width: number, height: number) {
    this.width = width;
    this.height = height;
    this.bits = new Uint8Array(width * height);
  }

  private apply(row: number, col: number, brushSize: number, value: 0 | 1): void {
    const half = Math.floor(brushSize / 2);
    const r0 = Math.max(0, row - half);
    const r1 = Math.min(this.height - 1, row + half);
    const c0 = Math.max(0, col - half);
    const c1 = Math.min(this.width - 1, col + half);
    for (let r = r0; r <= r1; r++) {
      for (let c = c0; c <= c1; c++) {
        const index = r * this.width + c;
        if (this.bits[index] !== value) {
          this.bits[index] = value;
          this.foreground += value === 1 ? 1 : -1;
        }
      }
    }
  }

  paint(row: number, col: number, brushSize = 3): void {
    this.apply(row, col, brushSize, 1);
  }

  erase(row: number, col: number, brushSize = 3): void {
    this.apply(row, col, brushSize, 0);
  }

  clear(): void {
    this.bits.fill(0);
    this.foreground = 0;
  }

  get(row: number, col: number): boolean {
    return this.bits[row * this.width + col] === 1;
  }

  get foregroundCount(): number {
    return this.foreground;
  }

  /** Submit is allowed only for a nonempty painted mask. */
  get canSubmit(): boolean {
    return this.foreground > 0;
  }

  snapshot(): Uint8Array {
    return this.bits.slice();
  }

  toPgm(): Uint8Array {
    return encodeMaskPgm(this.width, this.height, this.bits);
  }
}
