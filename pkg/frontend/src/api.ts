import type {
  BeforeAfterPayload,
  BoxplotPayload,
  GridPayload,
  LabelAck,
  StatusResponse,
  TriageItem,
} from './types';

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

/** Thin typed client over the feedback service.  Every call returns the
 *  parsed body; `raw` variants also expose the exact response text so the
 *  dashboard can display numbers byte-identical to the server's. */
export class FeedbackApi {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
      } catch {
        /* keep statusText */
      }
      throw new ApiError(res.status, detail);
    }
    return res;
  }

  async status(): Promise<StatusResponse> {
    return (await this.request('/status')).json();
  }

  async startInference(): Promise<StatusResponse> {
    return (await this.request('/infer', { method: 'POST' })).json();
  }

  async uncertainInstances(h?: number): Promise<TriageItem[]> {
    const query = h === undefined ? '' : `?h=${encodeURIComponent(h)}`;
    return (await this.request(`/instances/uncertain${query}`)).json();
  }

  async grid(instanceId: string): Promise<GridPayload> {
    return (
      await this.request(`/instances/${encodeURIComponent(instanceId)}/grid`)
    ).json();
  }

  async submitLabel(
    instanceId: string,
    label: 0 | 1,
    sessionId = 'ui',
  ): Promise<LabelAck> {
    return (
      await this.request('/labels', {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({
          instance_id: instanceId,
          label,
          session_id: sessionId,
        }),
      })
    ).json();
  }

  async triggerRetrain(overrideEmpty = false): Promise<StatusResponse> {
    return (
      await this.request('/retrain', {
        method: 'POST',
        headers: { 'content-type': 'application/json' },
        body: JSON.stringify({ override_empty: overrideEmpty }),
      })
    ).json();
  }

  /** Raw text is retained so displayed numbers are byte-traceable. */
  async beforeAfterRaw(): Promise<{ text: string; data: BeforeAfterPayload }> {
    const res = await this.request('/metrics/before-after');
    const text = await res.text();
    return { text, data: JSON.parse(text) };
  }

  async uncertaintyBoxplot(): Promise<BoxplotPayload> {
    return (await this.request('/reports/uncertainty-boxplot')).json();
  }
}
