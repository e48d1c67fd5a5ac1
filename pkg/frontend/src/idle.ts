// Keystroke idle detection: one suggestion request per idle period.

export interface IdleMonitorOptions {
  /** Threshold in ms; null disables the monitor entirely (L0). */
  thresholdMs: number | null;
  onIdle: () => void;
}

/**
 * Arms a countdown on every textual change and fires onIdle exactly once
 * when it lapses. After firing it stays quiet until the next textual
 * change, so a long pause never produces a second request. While
 * suspended (a suggestion is shown or a request is in flight) changes do
 * not arm the countdown; resume() re-enables arming but never fires by
 * itself.
 */
export class IdleMonitor {
  private thresholdMs: number | null;
  private handle: ReturnType<typeof setTimeout> | null = null;
  private suspended = false;

  constructor(private readonly options: IdleMonitorOptions) {
    this.thresholdMs = options.thresholdMs;
  }

  get armed(): boolean {
    return this.handle !== null;
  }

  setThreshold(thresholdMs: number | null): void {
    this.thresholdMs = thresholdMs;
    if (thresholdMs === null) this.clear();
  }

  recordTextualChange(): void {
    this.clear();
    if (this.thresholdMs === null || this.suspended) return;
    this.handle = setTimeout(() => {
      this.handle = null;
      this.options.onIdle();
    }, this.thresholdMs);
  }

  suspend(): void {
    this.suspended = true;
    this.clear();
  }

  resume(): void {
    this.suspended = false;
  }

  private clear(): void {
    if (this.handle !== null) {
      clearTimeout(this.handle);
      this.handle = null;
    }
  }

  dispose(): void {
    this.clear();
  }
}
