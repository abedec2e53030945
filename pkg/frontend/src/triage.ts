/** Labeling session state: the ordered uncertain-instance queue, the cursor,
 *  draft/committed labels, and keyboard-first actions.  All server writes go
 *  through the API client; the controller trusts only server acknowledgments
 *  for progress counts. */

import { FeedbackApi } from './api';
import type { TriageItem } from './types';

export type TriageEvent =
  | { kind: 'loaded'; count: number }
  | { kind: 'moved'; index: number }
  | { kind: 'labeled'; instanceId: string; label: 0 | 1; nLabeled: number }
  | { kind: 'skipped'; instanceId: string }
  | { kind: 'error'; message: string };

export class TriageController {
  items: TriageItem[] = [];
  cursor = 0;
  labeled = new Map<string, 0 | 1>();
  nLabeledOnServer = 0;
  private listeners: Array<(e: TriageEvent) => void> = [];

  constructor(
    private readonly api: FeedbackApi,
    private readonly sessionId = 'ui',
  ) {}

  onEvent(fn: (e: TriageEvent) => void): void {
    this.listeners.push(fn);
  }

  private emit(e: TriageEvent): void {
    for (const fn of this.listeners) fn(e);
  }

  /** Pull the uncertainty-ordered queue; server order is kept verbatim. */
  async load(h?: number): Promise<void> {
    this.items = await this.api.uncertainInstances(h);
    this.cursor = 0;
    this.labeled = new Map(
      this.items
        .filter((i) => i.label !== null)
        .map((i) => [i.instance_id, i.label as 0 | 1]),
    );
    this.nLabeledOnServer = this.labeled.size;
    this.emit({ kind: 'loaded', count: this.items.length });
  }

  get current(): TriageItem | undefined {
    return this.items[this.cursor];
  }

  get progress(): { labeled: number; total: number } {
    return { labeled: this.labeled.size, total: this.items.length };
  }

  get allLabeled(): boolean {
    return this.items.length > 0 && this.labeled.size === this.items.length;
  }

  next(): void {
    if (this.cursor < this.items.length - 1) {
      this.cursor += 1;
      this.emit({ kind: 'moved', index: this.cursor });
    }
  }

  prev(): void {
    if (this.cursor > 0) {
      this.cursor -= 1;
      this.emit({ kind: 'moved', index: this.cursor });
    }
  }

  /** Label the current card and advance.  The server is the source of truth:
   *  a rejection leaves local state untouched. */
  async label(value: 0 | 1): Promise<void> {
    const item = this.current;
    if (!item) return;
    try {
      const ack = await this.api.submitLabel(
        item.instance_id,
        value,
        this.sessionId,
      );
      this.labeled.set(item.instance_id, value);
      item.label = value;
      this.nLabeledOnServer = ack.n_labeled;
      this.emit({
        kind: 'labeled',
        instanceId: item.instance_id,
        label: value,
        nLabeled: ack.n_labeled,
      });
      this.next();
    } catch (err) {
      this.emit({ kind: 'error', message: String(err) });
      throw err;
    }
  }

  /** Undo = resubmit the opposite draft; the audit log keeps both entries. */
  async undo(): Promise<void> {
    const item = this.current;
    if (!item) return;
    const prev = this.labeled.get(item.instance_id);
    if (prev === undefined) return;
    await this.label(prev === 0 ? 1 : 0);
  }

  skip(): void {
    const item = this.current;
    if (item) this.emit({ kind: 'skipped', instanceId: item.instance_id });
    this.next();
  }

  /** Keyboard map: j/k navigate, a anomaly, b benign, s skip, u undo. */
  async handleKey(key: string): Promise<void> {
    switch (key) {
      case 'j':
        this.next();
        break;
      case 'k':
        this.prev();
        break;
      case 'a':
        await this.label(1);
        break;
      case 'b':
        await this.label(0);
        break;
      case 's':
        this.skip();
        break;
      case 'u':
        await this.undo();
        break;
      default:
        break;
    }
  }
}
