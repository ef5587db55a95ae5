/** Raw PGM/PPM (P5/P6, maxval 255) decoding for overlay rendering. */

export interface RasterFrame {
  width: number;
  height: number;
  /** RGBA, ready for canvas putImageData. */
  rgba: Uint8ClampedArray;
}

const WHITESPACE = new Set([0x20, 0x09, 0x0a, 0x0d, 0x0b, 0x0c]);

function readHeader(bytes: Uint8Array): {
  magic: string;
  width: number;
  height: number;
  payloadStart: number;
} {
  const tokens: string[] = [];
  let i = 0;
  while (tokens.length < 4 && i < bytes.length) {
    if (bytes[i] === 0x23) {
      // '#' comment runs to end of line
      while (i < bytes.length && bytes[i] !== 0x0a) i++;
      continue;
    }
    if (WHITESPACE.has(bytes[i])) {
      i++;
      continue;
    }
    let start = i;
    while (i < bytes.length && !WHITESPACE.has(bytes[i]) && bytes[i] !== 0x23) i++;
    tokens.push(new TextDecoder().decode(bytes.subarray(start, i)));
  }
  if (tokens.length < 4) throw new Error('truncated raster header');
  const [magic, w, h, maxval] = tokens;
  if (magic !== 'P5' && magic !== 'P6') throw new Error(`unsupported magic ${magic}`);
  if (maxval !== '255') throw new Error(`maxval must be 255, got ${maxval}`);
  // exactly one whitespace byte separates the header from the payload
  if (!WHITESPACE.has(bytes[i])) throw new Error('missing payload separator');
  return { magic, width: Number(w), height: Number(h), payloadStart: i + 1 };
}

export function decodeRaster(bytes: Uint8Array): RasterFrame {
  const { magic, width, height, payloadStart } = readHeader(bytes);
  const channels = magic === 'P6' ? 3 : 1;
  const expected = width * height * channels;
  const payload = bytes.subarray(payloadStart, payloadStart + expected);
  if (payload.length < expected) {
    throw new Error(`truncated payload: ${payload.length} of ${expected} bytes`);
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  for (let p = 0; p < width * height; p++) {
    const r = payload[p * channels];
    const g = channels === 3 ? payload[p * channels + 1] : r;
    const b = channels === 3 ? payload[p * channels + 2] : r;
    rgba[p * 4] = r;
    rgba[p * 4 + 1] = g;
    rgba[p * 4 + 2] = b;
    rgba[p * 4 + 3] = 255;
  }
  return { width, height, rgba };
}

/** Encode a binary mask as a raw PGM (foreground 255, background 0). */
export function encodeMaskPgm(width: number, height: number, bits: Uint8Array): Uint8Array {
  if (bits.length !== width * height) throw new Error('mask size mismatch');
  const header = new TextEncoder().encode(`P5\n${width} ${height}\n255\n`);
  const out = new Uint8Array(header.length + bits.length);
  out.set(header);
  for (let i = 0; i < bits.length; i++) out[header.length + i] = bits[i] ? 255 : 0;
  return out;
}

/** Decode a PGM mask back to bits (any nonzero sample is foreground). */
export function decodeMaskPgm(bytes: Uint8Array): { width: number; height: number; bits: Uint8Array } {
  const { magic, width, height, payloadStart } = readHeader(bytes);
  if (magic !== 'P5') throw new Error('masks are single-channel PGM');
  const payload = bytes.subarray(payloadStart, payloadStart + width * height);
  if (payload.length < width * height) throw new Error('truncated mask payload');
  const bits = new Uint8Array(width * height);
  for (let i = 0; i < bits.length; i++) bits[i] = payload[i] !== 0 ? 1 : 0;
  return { width, height, bits };
}
