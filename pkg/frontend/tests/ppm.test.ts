import { describe, expect, it } from 'vitest';

import { decodeMaskPgm, decodeRaster, encodeMaskPgm } from '../src/ppm.js';

function bytesOf(header: string, payload: number[]): Uint8Array {
  const head = new TextEncoder().encode(header);
  const out = new Uint8Array(head.length + payload.length);
  out.set(head);
  out.set(payload, head.length);
  return out;
}

describe('decodeRaster', () => {
  it('decodes a 2x1 P6', () => {
    const frame = decodeRaster(bytesOf('P6\n2 1\n255\n', [255, 0, 0, 0, 0, 255]));
    expect(frame.width).toBe(2);
    expect(frame.height).toBe(1);
    expect([...frame.rgba]).toEqual([255, 0, 0, 255, 0, 0, 255, 255]);
  });

  it('expands P5 gray to RGBA', () => {
    const frame = decodeRaster(bytesOf('P5\n1 2\n255\n', [0, 128]));
    expect([...frame.rgba]).toEqual([0, 0, 0, 255, 128, 128, 128, 255]);
  });

  it('skips header comments', () => {
    const frame = decodeRaster(bytesOf('P5 # c\n# line\n1 1\n255\n', [7]));
    expect(frame.rgba[0]).toBe(7);
  });

  it('rejects truncated payloads', () => {
    expect(() => decodeRaster(bytesOf('P6\n2 1\n255\n', [1, 2, 3]))).toThrow(/truncated/);
  });

  it('rejects unsupported maxval', () => {
    expect(() => decodeRaster(bytesOf('P5\n1 1\n65535\n', [0, 0]))).toThrow(/maxval/);
  });
});

describe('mask PGM round trip', () => {
  it('encodes foreground as 255 and decodes exactly', () => {
    const bits = new Uint8Array([1, 0, 0, 1, 1, 0]);
    const encoded = encodeMaskPgm(3, 2, bits);
    expect([...encoded.subarray(0, 11)]).toEqual([...new TextEncoder().encode('P5\n3 2\n255\n')]);
    const decoded = decodeMaskPgm(encoded);
    expect(decoded.width).toBe(3);
    expect(decoded.height).toBe(2);
    expect([...decoded.bits]).toEqual([...bits]);
  });
});
