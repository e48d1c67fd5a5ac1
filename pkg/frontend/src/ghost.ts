// Suggestion lifecycle: a ghost is uncommitted trailing text the writer
// accepts, dismisses, or types over.

import type { SuggestionView } from './api.js';

export type GhostPhase = 'idle' | 'requesting' | 'shown' | 'modifying';

const SENTENCE_FINAL = /[.!?…\n]/;

/**
 * State machine over one suggestion at a time. beginRequest() refuses
 * while a request is in flight or a ghost is visible, which is what keeps
 * at most one suggestion request pending. Ghost content never enters the
 * committed document here; accept() merely hands it back to the caller.
 */
export class GhostController {
  private _phase: GhostPhase = 'idle';
  private _suggestion: SuggestionView | null = null;
  private buffer = '';

  get phase(): GhostPhase {
    return this._phase;
  }

  get suggestion(): SuggestionView | null {
    return this._suggestion;
  }

  /** Text currently captured toward a modify decision. */
  get modifyBuffer(): string {
    return this.buffer;
  }

  beginRequest(): boolean {
    if (this._phase !== 'idle') return false;
    this._phase = 'requesting';
    return true;
  }

  resolveRequest(suggestion: SuggestionView | null): void {
    if (this._phase !== 'requesting') return;
    if (suggestion === null) {
      this._phase = 'idle';
    } else {
      this._suggestion = suggestion;
      this._phase = 'shown';
    }
  }

  failRequest(): void {
    if (this._phase === 'requesting') this._phase = 'idle';
  }

  accept(): SuggestionView {
    const suggestion = this.takeShown('accept');
    return suggestion;
  }

  reject(): SuggestionView {
    return this.takeShown('reject');
  }

  /** Typing over a visible ghost: hide it and start capturing the revision. */
  beginModify(): SuggestionView {
    if (this._phase !== 'shown' || this._suggestion === null) {
      throw new Error('no ghost to modify');
    }
    this._phase = 'modifying';
    this.buffer = '';
    return this._suggestion;
  }

  /**
   * Feed typed text while modifying. Returns the captured revision once a
   * sentence-final character arrives (the decision is posted then), null
   * while the sentence is still open.
   */
  captureTyped(inserted: string): string | null {
    if (this._phase !== 'modifying') throw new Error('not modifying');
    this.buffer += inserted;
    if (!SENTENCE_FINAL.test(inserted)) return null;
    const captured = this.buffer;
    this.reset();
    return captured;
  }

  /** Backspacing over captured text; false when the edit leaves the buffer. */
  shrinkCapture(count: number): boolean {
    if (this._phase !== 'modifying') throw new Error('not modifying');
    if (count > this.buffer.length) return false;
    this.buffer = this.buffer.slice(0, this.buffer.length - count);
    return true;
  }

  /** The suggestion a pending modify decision refers to. */
  get modifying(): SuggestionView | null {
    return this._phase === 'modifying' ? this._suggestion : null;
  }

  /** Conflict resync: drop everything. */
  clear(): void {
    this.reset();
  }

  private takeShown(action: string): SuggestionView {
    if (this._phase !== 'shown' || this._suggestion === null) {
      throw new Error(`no ghost to ${action}`);
    }
    const suggestion = this._suggestion;
    this.reset();
    return suggestion;
  }

  private reset(): void {
    this._phase = 'idle';
    this._suggestion = null;
    this.buffer = '';
  }
}
