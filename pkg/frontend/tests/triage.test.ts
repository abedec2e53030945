import { beforeEach, describe, expect, it, vi } from 'vitest';

import { FeedbackApi } from '../src/api';
import { TriageController } from '../src/triage';
import type { TriageItem } from '../src/types';

function item(id: string, uncertainty: number): TriageItem {
  return {
    instance_id: id,
    uncertainty,
    certainty: 1 - uncertainty,
    score: 0.1,
    votes: [5, 5],
    label: null,
    grid_url: `/instances/${id}/grid`,
  };
}

function makeController(items: TriageItem[]) {
  const submitted: Array<{ id: string; label: 0 | 1 }> = [];
  const api = {
    uncertainInstances: vi.fn(async () => items),
    submitLabel: vi.fn(async (id: string, label: 0 | 1) => {
      submitted.push({ id, label });
      return {
        ok: true,
        n_labeled: new Set(submitted.map((s) => s.id)).size,
        n_hil: items.length,
      };
    }),
  } as unknown as FeedbackApi;
  return { controller: new TriageController(api), submitted, api };
}

describe('TriageController', () => {
  let items: TriageItem[];

  beforeEach(() => {
    items = [item('i-2', 0.5), item('i-0', 0.4), item('i-1', 0.3)];
  });

  it('keeps the server ordering verbatim (uncertainty-descending)', async () => {
    const { controller } = makeController(items);
    await controller.load();
    expect(controller.items.map((i) => i.instance_id)).toEqual([
      'i-2',
      'i-0',
      'i-1',
    ]);
    expect(controller.current?.instance_id).toBe('i-2');
  });

  it('j/k navigation clamps at both ends', async () => {
    const { controller } = makeController(items);
    await controller.load();
    await controller.handleKey('k');
    expect(controller.cursor).toBe(0);
    await controller.handleKey('j');
    await controller.handleKey('j');
    await controller.handleKey('j');
    expect(controller.cursor).toBe(2);
  });

  it('labeling submits to the server and advances', async () => {
    const { controller, submitted } = makeController(items);
    await controller.load();
    await controller.handleKey('a');
    expect(submitted).toEqual([{ id: 'i-2', label: 1 }]);
    expect(controller.cursor).toBe(1);
    expect(controller.progress).toEqual({ labeled: 1, total: 3 });
  });

  it('allLabeled gates the retrain action', async () => {
    const { controller } = makeController(items);
    await controller.load();
    expect(controller.allLabeled).toBe(false);
    await controller.label(1);
    await controller.label(0);
    await controller.label(0);
    expect(controller.allLabeled).toBe(true);
  });

  it('undo resubmits the flipped label so the audit keeps both', async () => {
    const { controller, submitted } = makeController(items);
    await controller.load();
    await controller.label(1); // i-2 -> anomaly, cursor moves to i-0
    controller.prev();
    await controller.undo(); // i-2 -> benign
    expect(submitted).toEqual([
      { id: 'i-2', label: 1 },
      { id: 'i-2', label: 0 },
    ]);
    expect(controller.labeled.get('i-2')).toBe(0);
  });

  it('skip moves on without a server write', async () => {
    const { controller, submitted } = makeController(items);
    await controller.load();
    await controller.handleKey('s');
    expect(submitted).toEqual([]);
    expect(controller.cursor).toBe(1);
  });

  it('a server rejection leaves local state untouched', async () => {
    const api = {
      uncertainInstances: vi.fn(async () => items),
      submitLabel: vi.fn(async () => {
        throw new Error('HTTP 422: outside scope');
      }),
    } as unknown as FeedbackApi;
    const controller = new TriageController(api);
    await controller.load();
    await expect(controller.label(1)).rejects.toThrow('422');
    expect(controller.progress.labeled).toBe(0);
    expect(controller.cursor).toBe(0);
    expect(controller.current?.label).toBe(null);
  });

  it('reloading picks up labels already on the server', async () => {
    const labeled = [
      { ...item('x', 0.5), label: 1 as const },
      item('y', 0.2),
    ];
    const { controller } = makeController(labeled);
    await controller.load();
    expect(controller.progress).toEqual({ labeled: 1, total: 2 });
  });
});
