/** Browser entry point: wires the triage queue, heatmap viewer, and retrain
 *  dashboard to the DOM.  All numbers shown come straight from API payloads. */

import { ApiError, FeedbackApi } from './api';
import { paintGrid } from './heatmap';
import { beforeAfterRows, RetrainMonitor } from './monitor';
import { TriageController } from './triage';
import type { BoxplotGroup, GridPayload } from './types';

const api = new FeedbackApi(
  (window as unknown as { CAAD_API_URL?: string }).CAAD_API_URL ?? '',
);
const triage = new TriageController(api);
const monitor = new RetrainMonitor(api);

const el = (id: string) => document.getElementById(id)!;

let gain = 1;
let currentGrid: GridPayload | null = null;

function renderStatusLine(text: string): void {
  el('status-line').textContent = text;
}

async function refreshStatus(): Promise<void> {
  const status = await api.status();
  renderStatusLine(
    `phase: ${status.phase} | review scope: ${status.n_hil} | labeled: ` +
      `${status.n_labeled}${status.error ? ` | error: ${status.error}` : ''}`,
  );
  (el('retrain-btn') as HTMLButtonElement).disabled =
    status.phase !== 'awaiting_labels' || !triage.allLabeled;
  (el('infer-btn') as HTMLButtonElement).disabled = status.phase !== 'idle';
}

function renderProgress(): void {
  const { labeled, total } = triage.progress;
  el('progress').textContent = `${labeled} / ${total} labeled`;
  const bar = el('progress-bar') as HTMLProgressElement;
  bar.max = total;
  bar.value = labeled;
}

async function showCurrent(): Promise<void> {
  const item = triage.current;
  if (!item) {
    el('card-meta').textContent = 'queue empty';
    return;
  }
  el('card-meta').innerHTML = [
    `<b>${item.instance_id}</b>`,
    `uncertainty ${item.uncertainty.toFixed(3)}`,
    `certainty ${item.certainty.toFixed(3)}`,
    `score ${item.score.toFixed(6)}`,
    `votes ${item.votes[0]} benign / ${item.votes[1]} anomaly`,
    `label: ${item.label === null ? 'unset' : item.label === 1 ? 'anomaly' : 'benign'}`,
  ].join(' · ');
  currentGrid = await api.grid(item.instance_id);
  paintGrid(el('grid-canvas') as HTMLCanvasElement, currentGrid, gain);
  renderList();
}

function renderList(): void {
  const list = el('item-list');
  list.innerHTML = '';
  triage.items.forEach((item, idx) => {
    const row = document.createElement('div');
    row.className =
      'item-row' + (idx === triage.cursor ? ' active' : '') +
      (item.label !== null ? ' labeled' : '');
    row.textContent =
      `${item.instance_id}  u=${item.uncertainty.toFixed(3)}` +
      (item.label === null ? '' : item.label === 1 ? '  [anomaly]' : '  [benign]');
    row.onclick = () => {
      triage.cursor = idx;
      void showCurrent();
    };
    list.appendChild(row);
  });
}

function renderBox(group: BoxplotGroup | undefined, label: string): string {
  if (!group) return `<div class="box-group"><h4>${label}</h4><i>no instances</i></div>`;
  const fmt = (f: { min: number; q1: number; median: number; q3: number; max: number; n: number }) =>
    `min ${f.min.toFixed(3)} · q1 ${f.q1.toFixed(3)} · median ` +
    `${f.median.toFixed(3)} · q3 ${f.q3.toFixed(3)} · max ${f.max.toFixed(3)} (n=${f.n})`;
  return (
    `<div class="box-group"><h4>${label}</h4>` +
    `<div>before: ${fmt(group.before)}</div>` +
    `<div>after:&nbsp; ${fmt(group.after)}</div></div>`
  );
}

async function runRetrain(): Promise<void> {
  renderStatusLine('retraining…');
  try {
    const result = await monitor.triggerAndWait();
    const rows = beforeAfterRows(result.metrics)
      .map(
        (r) =>
          `<tr><td>${r.metric}</td><td>${r.before}</td>` +
          `<td>${r.after}</td><td>${r.delta >= 0 ? '+' : ''}${r.delta.toFixed(4)}</td></tr>`,
      )
      .join('');
    el('dashboard').innerHTML =
      '<table><tr><th>metric</th><th>before</th><th>after</th><th>Δ</th></tr>' +
      rows +
      '</table>' +
      renderBox(result.boxplot.hil_benign, 'expert-labeled benign (certainty)') +
      renderBox(result.boxplot.hil_anomaly, 'expert-labeled anomalies (certainty)');
  } catch (err) {
    el('dashboard').textContent = `retraining failed: ${err}`;
  }
  await refreshStatus();
}

async function boot(): Promise<void> {
  await refreshStatus();
  try {
    await triage.load();
  } catch (err) {
    if (!(err instanceof ApiError && err.status === 409)) throw err;
  }
  renderProgress();
  await showCurrent();

  triage.onEvent(() => {
    renderProgress();
    void showCurrent();
    void refreshStatus();
  });

  document.addEventListener('keydown', (e) => {
    if (e.target instanceof HTMLInputElement) return;
    void triage.handleKey(e.key);
  });

  (el('gain') as HTMLInputElement).oninput = (e) => {
    gain = Number((e.target as HTMLInputElement).value);
    el('gain-value').textContent = `${gain}x`;
    if (currentGrid) {
      paintGrid(el('grid-canvas') as HTMLCanvasElement, currentGrid, gain);
    }
  };

  (el('infer-btn') as HTMLButtonElement).onclick = async () => {
    renderStatusLine('running inference…');
    await api.startInference();
    await triage.load();
    renderProgress();
    await showCurrent();
    await refreshStatus();
  };

  (el('retrain-btn') as HTMLButtonElement).onclick = () => void runRetrain();
}

void boot();
