/** Wire types mirroring the feedback service's JSON payloads.  The UI never
 *  invents fields of its own: everything rendered is traceable to one of
 *  these shapes. */

export type Phase =
  | 'idle'
  | 'inferring'
  | 'awaiting_labels'
  | 'retraining'
  | 'done';

export interface StatusResponse {
  phase: Phase;
  h_percent: number;
  n_hil: number;
  n_labeled: number;
  retrained_checkpoint: string | null;
  error: string | null;
}

export interface TriageItem {
  instance_id: string;
  uncertainty: number;
  certainty: number;
  score: number;
  votes: [number, number];
  label: 0 | 1 | null;
  grid_url: string;
}

export interface GridPayload {
  instance_id: string;
  shape: [number, number];
  values: number[][];
  quantized_b64: string;
}

export interface LabelAck {
  ok: boolean;
  n_labeled: number;
  n_hil: number;
}

export interface MetricsReport {
  benign_f1: number;
  anomaly_f1: number;
  weighted_f1: number;
  auroc: number;
  auprc: number;
  support: [number, number];
  confusion: [number, number, number, number];
}

export interface BeforeAfterPayload {
  before: MetricsReport;
  after: MetricsReport;
  after_without_hil: MetricsReport;
  n_feedback: number;
}

export interface FiveNumber {
  min: number;
  q1: number;
  median: number;
  q3: number;
  max: number;
  n: number;
}

export interface BoxplotGroup {
  before: FiveNumber;
  after: FiveNumber;
}

/** Groups with no members are absent from the payload entirely. */
export interface BoxplotPayload {
  hil_benign?: BoxplotGroup;
  hil_anomaly?: BoxplotGroup;
}
