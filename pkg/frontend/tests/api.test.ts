import { describe, expect, it, vi } from 'vitest';

import { ApiError, FeedbackApi } from '../src/api';

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { 'content-type': 'application/json' },
  });
}

describe('FeedbackApi', () => {
  it('fetches status from the base url', async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse({ phase: 'idle', h_percent: 5, n_hil: 0, n_labeled: 0 }),
    );
    const api = new FeedbackApi('http://host:1', fetchImpl as typeof fetch);
    const status = await api.status();
    expect(status.phase).toBe('idle');
    expect(fetchImpl).toHaveBeenCalledWith('http://host:1/status', undefined);
  });

  it('posts labels with the documented body shape', async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse({ ok: true, n_labeled: 1, n_hil: 3 }),
    );
    const api = new FeedbackApi('', fetchImpl as typeof fetch);
    const ack = await api.submitLabel('test-00001', 1, 'session-9');
    expect(ack.n_labeled).toBe(1);
    const [url, init] = fetchImpl.mock.calls[0];
    expect(url).toBe('/labels');
    expect(JSON.parse((init as RequestInit).body as string)).toEqual({
      instance_id: 'test-00001',
      label: 1,
      session_id: 'session-9',
    });
  });

  it('surfaces server rejections as typed errors with the detail', async () => {
    const fetchImpl = vi.fn(async () =>
      jsonResponse({ detail: 'outside the current expert-review scope' }, 422),
    );
    const api = new FeedbackApi('', fetchImpl as typeof fetch);
    await expect(api.submitLabel('nope', 0)).rejects.toThrowError(ApiError);
    await expect(api.submitLabel('nope', 0)).rejects.toMatchObject({
      status: 422,
      detail: 'outside the current expert-review scope',
    });
  });

  it('passes the h query through uncertainInstances', async () => {
    const fetchImpl = vi.fn(async () => jsonResponse([]));
    const api = new FeedbackApi('', fetchImpl as typeof fetch);
    await api.uncertainInstances(7.5);
    expect(fetchImpl.mock.calls[0][0]).toBe('/instances/uncertain?h=7.5');
  });

  it('keeps the raw metrics text byte-identical to the response', async () => {
    const text =
      '{"before": {"weighted_f1": 0.90000001}, "after": {"weighted_f1": 0.95}}';
    const fetchImpl = vi.fn(async () => new Response(text, { status: 200 }));
    const api = new FeedbackApi('', fetchImpl as typeof fetch);
    const { text: raw, data } = await api.beforeAfterRaw();
    expect(raw).toBe(text);
    expect(data.before.weighted_f1).toBeCloseTo(0.90000001, 9);
  });
});
