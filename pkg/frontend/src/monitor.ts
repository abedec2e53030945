/** Retraining job monitor: trigger, poll /status until the phase settles,
 *  then fetch the before/after metrics (raw text retained for byte-level
 *  traceability) and the uncertainty box-plot groups. */

import { FeedbackApi } from './api';
import type {
  BeforeAfterPayload,
  BoxplotPayload,
  StatusResponse,
} from './types';

export interface RetrainResult {
  status: StatusResponse;
  metrics: BeforeAfterPayload;
  metricsRawText: string;
  boxplot: BoxplotPayload;
}

export class RetrainMonitor {
  constructor(
    private readonly api: FeedbackApi,
    private readonly pollIntervalMs = 1000,
    private readonly sleep: (ms: number) => Promise<void> = defaultSleep,
  ) {}

  /** Poll until the service leaves the retraining phase.  Resolves with the
   *  dashboard payloads on success; rejects with the server diagnostic when
   *  the job failed (phase falls back with an error set). */
  async waitForCompletion(maxPolls = 3600): Promise<RetrainResult> {
    for (let i = 0; i < maxPolls; i++) {
      const status = await this.api.status();
      if (status.phase === 'done') {
        const { text, data } = await this.api.beforeAfterRaw();
        const boxplot = await this.api.uncertaintyBoxplot();
        return { status, metrics: data, metricsRawText: text, boxplot };
      }
      if (status.phase !== 'retraining') {
        throw new Error(
          `retraining stopped in phase '${status.phase}': ${
            status.error ?? 'no diagnostic'
          }`,
        );
      }
      await this.sleep(this.pollIntervalMs);
    }
    throw new Error('retraining did not complete within the polling budget');
  }

  async triggerAndWait(overrideEmpty = false): Promise<RetrainResult> {
    await this.api.triggerRetrain(overrideEmpty);
    return this.waitForCompletion();
  }
}

/** Flat delta rows for the dashboard table; pure formatting, no arithmetic
 *  beyond the displayed difference. */
export function beforeAfterRows(
  payload: BeforeAfterPayload,
): Array<{ metric: string; before: number; after: number; delta: number }> {
  const keys = [
    'benign_f1',
    'anomaly_f1',
    'weighted_f1',
    'auroc',
    'auprc',
  ] as const;
  return keys.map((k) => ({
    metric: k,
    before: payload.before[k],
    after: payload.after[k],
    delta: payload.after[k] - payload.before[k],
  }));
}

function defaultSleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
