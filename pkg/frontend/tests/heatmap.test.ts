import { describe, expect, it } from 'vitest';

import { colorAt, decodeQuantized, gridToRgba } from '../src/heatmap';
import type { GridPayload } from '../src/types';

describe('heatmap rendering', () => {
  it('maps 0 and 1 to the ramp endpoints and clamps outside', () => {
    expect(colorAt(0)).toEqual([68, 1, 84]);
    expect(colorAt(1)).toEqual([253, 231, 37]);
    expect(colorAt(-4)).toEqual(colorAt(0));
    expect(colorAt(9)).toEqual(colorAt(1));
  });

  it('produces one opaque RGBA pixel per cell in row-major order', () => {
    const rgba = gridToRgba([
      [0, 1],
      [0.5, 0],
    ]);
    expect(rgba.length).toBe(16);
    expect([rgba[4], rgba[5], rgba[6]]).toEqual([253, 231, 37]); // (0,1)
    for (let i = 3; i < 16; i += 4) expect(rgba[i]).toBe(255);
  });

  it('gain amplifies faint values without touching the data', () => {
    const values = [[0.02]];
    const dim = gridToRgba(values, 1);
    const bright = gridToRgba(values, 30);
    expect(bright[0] + bright[1] + bright[2]).toBeGreaterThan(
      dim[0] + dim[1] + dim[2],
    );
    expect(values[0][0]).toBe(0.02); // untouched
  });

  it('gain saturates at the top of the ramp instead of wrapping', () => {
    expect(gridToRgba([[0.9]], 40)).toEqual(gridToRgba([[1.0]], 1));
  });

  it('decodes the quantized 8-bit tile back to [0,1] values', () => {
    const bytes = Uint8Array.from([0, 255, 128, 64]);
    const payload: GridPayload = {
      instance_id: 'x',
      shape: [2, 2],
      values: [],
      quantized_b64: Buffer.from(bytes).toString('base64'),
    };
    const grid = decodeQuantized(payload);
    expect(grid[0][0]).toBe(0);
    expect(grid[0][1]).toBe(1);
    expect(grid[1][0]).toBeCloseTo(128 / 255, 6);
  });

  it('rejects tiles whose byte count disagrees with the shape', () => {
    const payload: GridPayload = {
      instance_id: 'x',
      shape: [3, 3],
      values: [],
      quantized_b64: Buffer.from([1, 2]).toString('base64'),
    };
    expect(() => decodeQuantized(payload)).toThrow('expected 9');
  });
});
