// The co-writing surface: a textarea with ghost-text suggestions, idle
// detection, accept/modify/reject keys, paradigm selection, and telemetry.

import {
  ApiClient,
  ApiError,
  type EditorEvent,
  EventOutbox,
  type FetchLike,
  type OutboxStatus,
  type SessionView,
  type SuggestionView,
} from './api.js';
import { GhostController } from './ghost.js';
import { IdleMonitor } from './idle.js';
import { TelemetryTracker } from './telemetry.js';

export interface EditorOptions {
  root: HTMLElement;
  baseUrl: string;
  paradigm?: string;
  initialText?: string;
  fetchLike?: FetchLike;
  flushIntervalMs?: number;
  reconcileIntervalMs?: number;
  /** Retry delays for failed suggestion requests; the last entry repeats. */
  requestBackoffMs?: number[];
}

interface SpanDiff {
  offset: number;
  removed: string;
  inserted: string;
}

/** Minimal single-span difference between two versions of the document. */
export function singleSpanDiff(oldValue: string, newValue: string): SpanDiff {
  let prefix = 0;
  const max = Math.min(oldValue.length, newValue.length);
  while (prefix < max && oldValue[prefix] === newValue[prefix]) prefix += 1;
  let suffix = 0;
  while (
    suffix < max - prefix &&
    oldValue[oldValue.length - 1 - suffix] === newValue[newValue.length - 1 - suffix]
  ) {
    suffix += 1;
  }
  return {
    offset: prefix,
    removed: oldValue.slice(prefix, oldValue.length - suffix),
    inserted: newValue.slice(prefix, newValue.length - suffix),
  };
}

const PARADIGMS = ['L0', 'L1', 'L2', 'L3'];
const REQUEST_BACKOFF = [500, 1000, 2000, 4000, 8000];

export class CowriteEditor {
  readonly api: ApiClient;
  readonly ghost = new GhostController();

  // DOM
  readonly textarea: HTMLTextAreaElement;
  readonly ghostSpan: HTMLElement;
  readonly committedSpan: HTMLElement;
  readonly statusSpan: HTMLElement;
  readonly statsSpan: HTMLElement;
  readonly suggestButton: HTMLButtonElement;
  readonly paradigmSelect: HTMLSelectElement;

  sessionId = '';
  paradigm: string;
  private thresholdMs: number | null = null;
  private progress = 0;
  private previousValue = '';
  private expectedText = '';
  private modifyTarget: SuggestionView | null = null;
  private retryEpoch = 0;
  private requestRetrying = false;
  private outboxStatus: OutboxStatus = 'idle';
  private reconcileHandle: ReturnType<typeof setInterval> | null = null;
  private readonly suggestionContents = new Map<string, string>();
  private readonly requestBackoff: number[];

  readonly idle: IdleMonitor;
  readonly tracker: TelemetryTracker;
  readonly outbox: EventOutbox;

  /** Local mirror of the server's telemetry counters. */
  readonly mirror = {
    shown: 0,
    accepted: 0,
    modified: 0,
    rejected: 0,
    windowSwitches: 0,
    activeMs: 0,
  };

  private readonly onWindowBlur = () => this.tracker.blur();
  private readonly onWindowFocus = () => this.tracker.focus();

  constructor(private readonly options: EditorOptions) {
    this.api = new ApiClient(options.baseUrl, options.fetchLike);
    this.paradigm = options.paradigm ?? 'L1';
    this.requestBackoff = options.requestBackoffMs ?? REQUEST_BACKOFF;

    const root = options.root;
    root.classList.add('cowrite-editor');
    root.innerHTML = `
      <div class="toolbar">
        <label>Paradigm <select class="paradigm"></select></label>
        <button type="button" class="suggest" hidden>Suggest</button>
        <span class="status">connecting</span>
        <span class="stats"></span>
      </div>
      <div class="surface">
        <pre class="mirror" aria-hidden="true"><span class="committed"></span><span class="ghost"></span></pre>
        <textarea class="doc" spellcheck="false"></textarea>
      </div>
      <p class="help">Tab accepts the suggestion, Esc dismisses it, typing revises it;
      a revision is sent when the sentence ends (. ! ? or a new line). Write at the
      end of the document; elsewhere only deletions are tracked.</p>
    `;
    this.textarea = root.querySelector('textarea.doc')!;
    this.ghostSpan = root.querySelector('span.ghost')!;
    this.committedSpan = root.querySelector('span.committed')!;
    this.statusSpan = root.querySelector('span.status')!;
    this.statsSpan = root.querySelector('span.stats')!;
    this.suggestButton = root.querySelector('button.suggest')!;
    this.paradigmSelect = root.querySelector('select.paradigm')!;
    for (const level of PARADIGMS) {
      const option = document.createElement('option');
      option.value = level;
      option.textContent = level;
      this.paradigmSelect.append(option);
    }
    this.paradigmSelect.value = this.paradigm;

    this.idle = new IdleMonitor({
      thresholdMs: null,
      onIdle: () => void this.requestSuggestion('idle'),
    });
    this.tracker = new TelemetryTracker({
      onFocusCycle: () => {
        this.mirror.windowSwitches += 1;
        this.postEvent({ type: 'focus_change' });
      },
      onActiveTime: (activeMs) => {
        this.mirror.activeMs += activeMs;
        this.postEvent({ type: 'active_time', active_ms: activeMs });
      },
      flushIntervalMs: options.flushIntervalMs,
    });
    this.outbox = new EventOutbox({
      post: (event) => this.api.postEvent(this.sessionId, event),
      onAck: (event, text) => this.onAck(event, text),
      onConflict: () => void this.resyncFromServer(),
      onStatus: (status) => {
        this.outboxStatus = status;
        this.render();
      },
    });

    this.textarea.addEventListener('input', () => this.onInput());
    this.textarea.addEventListener('keydown', (event) => this.onKeydown(event));
    this.suggestButton.addEventListener('click', () => void this.requestSuggestion('demand'));
    this.paradigmSelect.addEventListener('change', () => void this.switchParadigm(this.paradigmSelect.value));
    window.addEventListener('blur', this.onWindowBlur);
    window.addEventListener('focus', this.onWindowFocus);
  }

  async init(): Promise<void> {
    const view = await this.api.createSession(this.paradigm, this.options.initialText ?? '');
    this.adoptView(view);
    this.tracker.start(true);
    this.reconcileHandle = setInterval(
      () => void this.reconcile(),
      this.options.reconcileIntervalMs ?? 15_000,
    );
    this.render();
  }

  private adoptView(view: SessionView): void {
    this.sessionId = view.session_id;
    this.paradigm = view.paradigm;
    this.progress = view.progress;
    this.thresholdMs = view.idle_threshold_s === null ? null : view.idle_threshold_s * 1000;
    this.idle.setThreshold(this.thresholdMs);
    this.textarea.value = view.text;
    this.previousValue = view.text;
    this.expectedText = view.text;
    this.suggestButton.hidden = view.paradigm !== 'L0';
  }

  // --- typing ---------------------------------------------------------

  private onInput(): void {
    const diff = singleSpanDiff(this.previousValue, this.textarea.value);
    this.previousValue = this.textarea.value;
    this.retryEpoch += 1;
    if (diff.removed === '' && diff.inserted === '') return;

    if (this.ghost.phase === 'shown' && diff.inserted !== '' && diff.removed === '') {
      // typing over the ghost: hide it, start capturing the revision
      this.modifyTarget = this.ghost.beginModify();
      this.renderGhost();
    }

    if (this.ghost.phase === 'modifying') {
      this.handleModifyingInput(diff);
      return;
    }

    if (this.ghost.phase === 'shown') {
      // a deletion while the ghost is visible dismisses it
      this.postFeedback(this.ghost.reject(), 'reject');
      this.mirror.rejected += 1;
      this.idle.resume();
    }

    if (diff.removed !== '' && diff.inserted !== '') {
      // replacement: not representable as one event; adopt the server copy
      void this.resyncFromServer();
      return;
    }
    if (diff.inserted !== '') {
      if (diff.offset !== this.previousValue.length - diff.inserted.length) {
        // mid-document insertion is outside the append-only protocol
        void this.resyncFromServer();
        return;
      }
      this.postEvent({ type: 'typed_text', text: diff.inserted });
    } else {
      this.postEvent({ type: 'deletion', offset: diff.offset, removed: diff.removed });
    }
    this.idle.recordTextualChange();
    this.render();
  }

  private handleModifyingInput(diff: SpanDiff): void {
    const target = this.modifyTarget;
    if (target === null) return;
    if (diff.removed === '' && diff.inserted !== '') {
      const atEnd = diff.offset === this.previousValue.length - diff.inserted.length;
      if (!atEnd) {
        void this.abortModify(target);
        return;
      }
      const captured = this.ghost.captureTyped(diff.inserted);
      if (captured !== null) {
        this.modifyTarget = null;
        this.postFeedback(target, 'modify', captured);
        this.mirror.modified += 1;
        this.idle.resume();
        this.idle.recordTextualChange();
      }
    } else if (diff.inserted === '' && diff.removed !== '') {
      const withinCapture =
        diff.offset >= this.previousValue.length - (this.ghost.modifyBuffer.length - diff.removed.length);
      if (!(withinCapture && this.ghost.shrinkCapture(diff.removed.length))) {
        void this.abortModify(target);
      }
    } else {
      void this.abortModify(target);
    }
    this.render();
  }

  /** Capture went off the rails: dismiss the suggestion, resync the text. */
  private async abortModify(target: SuggestionView): Promise<void> {
    this.ghost.clear();
    this.modifyTarget = null;
    this.postFeedback(target, 'reject');
    this.mirror.rejected += 1;
    await this.resyncFromServer();
  }

  // --- decisions ------------------------------------------------------

  private onKeydown(event: KeyboardEvent): void {
    if (this.ghost.phase !== 'shown') return;
    if (event.key === 'Tab') {
      event.preventDefault();
      const suggestion = this.ghost.accept();
      this.textarea.value += suggestion.content;
      this.previousValue = this.textarea.value;
      this.postFeedback(suggestion, 'accept');
      this.mirror.accepted += 1;
      this.idle.resume();
      this.idle.recordTextualChange();
      this.render();
    } else if (event.key === 'Escape') {
      event.preventDefault();
      const suggestion = this.ghost.reject();
      this.postFeedback(suggestion, 'reject');
      this.mirror.rejected += 1;
      this.idle.resume();
      this.render();
    }
  }

  private postFeedback(suggestion: SuggestionView, kind: 'accept' | 'modify' | 'reject', finalText?: string): void {
    const event: EditorEvent = { type: 'feedback', suggestion_id: suggestion.suggestion_id, kind };
    if (finalText !== undefined) event.final_text = finalText;
    this.postEvent(event);
  }

  private postEvent(event: EditorEvent): void {
    this.outbox.enqueue(event);
  }

  // --- suggestions ----------------------------------------------------

  async requestSuggestion(kind: 'idle' | 'demand'): Promise<void> {
    if (!this.ghost.beginRequest()) return;
    this.idle.suspend();
    const epoch = this.retryEpoch;
    for (let attempt = 0; ; attempt += 1) {
      try {
        const suggestion =
          kind === 'demand'
            ? await this.api.demandSuggestion(this.sessionId)
            : await this.api.requestSuggestion(this.sessionId, this.thresholdMs ?? 0, this.progress);
        this.requestRetrying = false;
        this.ghost.resolveRequest(suggestion);
        if (suggestion !== null) {
          this.suggestionContents.set(suggestion.suggestion_id, suggestion.content);
          this.mirror.shown += 1;
        } else {
          this.idle.resume();
        }
        this.render();
        return;
      } catch (error) {
        if (error instanceof ApiError) {
          // the server refused outright; retrying the same request is pointless
          this.ghost.failRequest();
          this.idle.resume();
          this.requestRetrying = false;
          this.render();
          return;
        }
        this.requestRetrying = true;
        this.render();
        const delay = this.requestBackoff[Math.min(attempt, this.requestBackoff.length - 1)]!;
        await new Promise((resolve) => setTimeout(resolve, delay));
        if (this.retryEpoch !== epoch) {
          // the document moved while we were down; this request is stale
          this.ghost.failRequest();
          this.idle.resume();
          this.requestRetrying = false;
          this.render();
          return;
        }
      }
    }
  }

  // --- reconciliation -------------------------------------------------

  private applyToExpected(event: EditorEvent): boolean {
    switch (event.type) {
      case 'typed_text':
        this.expectedText += event.text;
        return true;
      case 'deletion': {
        const present = this.expectedText.slice(event.offset, event.offset + event.removed.length);
        if (present !== event.removed) return false;
        this.expectedText =
          this.expectedText.slice(0, event.offset) +
          this.expectedText.slice(event.offset + event.removed.length);
        return true;
      }
      case 'feedback':
        if (event.kind === 'accept') {
          const content = this.suggestionContents.get(event.suggestion_id);
          if (content === undefined) return false;
          this.expectedText += content;
        } else if (event.kind === 'modify') {
          this.expectedText += event.final_text ?? '';
        }
        return true;
      default:
        return true;
    }
  }

  private onAck(event: EditorEvent, text: string): void {
    if (!this.applyToExpected(event) || text !== this.expectedText) {
      void this.resyncFromServer();
    }
  }

  private async reconcile(): Promise<void> {
    if (this.outbox.size > 0 || this.ghost.phase === 'modifying' || this.ghost.phase === 'requesting') return;
    try {
      const view = await this.api.getSession(this.sessionId);
      this.progress = view.progress;
      this.thresholdMs = view.idle_threshold_s === null ? null : view.idle_threshold_s * 1000;
      this.idle.setThreshold(this.thresholdMs);
      if (view.text !== this.textarea.value) {
        this.ghost.clear();
        this.modifyTarget = null;
        this.textarea.value = view.text;
        this.previousValue = view.text;
        this.expectedText = view.text;
        this.render();
      }
    } catch {
      // transient; the next tick will try again
    }
  }

  private async resyncFromServer(): Promise<void> {
    try {
      const view = await this.api.getSession(this.sessionId);
      this.ghost.clear();
      this.modifyTarget = null;
      this.adoptView(view);
      this.render();
    } catch {
      // still offline; reconciliation keeps trying
    }
  }

  // --- paradigm -------------------------------------------------------

  /** Paradigm change starts a fresh session seeded with the current text. */
  async switchParadigm(paradigm: string): Promise<void> {
    this.ghost.clear();
    this.modifyTarget = null;
    const view = await this.api.createSession(paradigm, this.textarea.value);
    this.adoptView(view);
    this.render();
  }

  // --- rendering ------------------------------------------------------

  private render(): void {
    this.renderGhost();
    this.committedSpan.textContent = this.textarea.value;
    const offline = this.outboxStatus === 'offline' || this.requestRetrying;
    this.statusSpan.textContent = offline ? 'retrying' : 'connected';
    const seconds = Math.round(this.mirror.activeMs / 1000);
    this.statsSpan.textContent =
      `shown ${this.mirror.shown} · accepted ${this.mirror.accepted} · ` +
      `modified ${this.mirror.modified} · rejected ${this.mirror.rejected} · ` +
      `switches ${this.mirror.windowSwitches} · active ${seconds}s`;
  }

  private renderGhost(): void {
    this.ghostSpan.textContent =
      this.ghost.phase === 'shown' ? this.ghost.suggestion?.content ?? '' : '';
  }

  dispose(): void {
    this.idle.dispose();
    this.tracker.stop();
    this.outbox.dispose();
    if (this.reconcileHandle !== null) clearInterval(this.reconcileHandle);
    window.removeEventListener('blur', this.onWindowBlur);
    window.removeEventListener('focus', this.onWindowFocus);
  }
}
