/** Density-grid rendering: normalized values -> RGBA pixels.
 *
 *  Injected anomalies sit near 1/global_max, which can be a few percent of
 *  full scale, so the renderer exposes a gain multiplier the reviewer can
 *  crank up to make faint pixels visible (the numeric payload is never
 *  modified, only the rendering).
 */

import type { GridPayload } from './types';

/** Perceptually ordered dark-to-bright ramp (viridis-like anchor points). */
const RAMP: Array<[number, number, number]> = [
  [68, 1, 84],
  [59, 82, 139],
  [33, 145, 140],
  [94, 201, 98],
  [253, 231, 37],
];

export function colorAt(t: number): [number, number, number] {
  const clamped = Math.min(1, Math.max(0, t));
  const x = clamped * (RAMP.length - 1);
  const i = Math.min(RAMP.length - 2, Math.floor(x));
  const frac = x - i;
  const [r0, g0, b0] = RAMP[i];
  const [r1, g1, b1] = RAMP[i + 1];
  return [
    Math.round(r0 + (r1 - r0) * frac),
    Math.round(g0 + (g1 - g0) * frac),
    Math.round(b0 + (b1 - b0) * frac),
  ];
}

/** Flatten a grid into RGBA bytes, applying display gain (values clip at 1). */
export function gridToRgba(values: number[][], gain = 1): Uint8ClampedArray {
  const rows = values.length;
  const cols = rows > 0 ? values[0].length : 0;
  const out = new Uint8ClampedArray(rows * cols * 4);
  for (let r = 0; r < rows; r++) {
    for (let c = 0; c < cols; c++) {
      const [red, green, blue] = colorAt(values[r][c] * gain);
      const o = (r * cols + c) * 4;
      out[o] = red;
      out[o + 1] = green;
      out[o + 2] = blue;
      out[o + 3] = 255;
    }
  }
  return out;
}

/** Decode the server's 8-bit tile into row-major [0,1] values. */
export function decodeQuantized(payload: GridPayload): number[][] {
  const bytes = base64ToBytes(payload.quantized_b64);
  const [rows, cols] = payload.shape;
  if (bytes.length !== rows * cols) {
    throw new Error(
      `quantized tile has ${bytes.length} bytes, expected ${rows * cols}`,
    );
  }
  const out: number[][] = [];
  for (let r = 0; r < rows; r++) {
    const row: number[] = [];
    for (let c = 0; c < cols; c++) {
      row.push(bytes[r * cols + c] / 255);
    }
    out.push(row);
  }
  return out;
}

function base64ToBytes(b64: string): Uint8Array {
  if (typeof atob === 'function') {
    const bin = atob(b64);
    const out = new Uint8Array(bin.length);
    for (let i = 0; i < bin.length; i++) out[i] = bin.charCodeAt(i);
    return out;
  }
  return Uint8Array.from(Buffer.from(b64, 'base64'));
}

/** Paint a grid onto a canvas, one cell per device pixel block. */
export function paintGrid(
  canvas: HTMLCanvasElement,
  payload: GridPayload,
  gain = 1,
): void {
  const [rows, cols] = payload.shape;
  const ctx = canvas.getContext('2d');
  if (!ctx) return;
  const rgba = gridToRgba(payload.values, gain);
  const image = new ImageData(new Uint8ClampedArray(rgba), cols, rows);
  // draw at native resolution, let CSS scale it up with pixelated rendering
  canvas.width = cols;
  canvas.height = rows;
  ctx.putImageData(image, 0, 0);
}
