// Focus telemetry: window-switch counting and active editing time.

export interface TelemetryTrackerOptions {
  /** One completed blur-then-focus cycle. */
  onFocusCycle: () => void;
  /** Accumulated focused milliseconds, emitted at each flush. */
  onActiveTime: (activeMs: number) => void;
  flushIntervalMs?: number;
  now?: () => number;
}

const DEFAULT_FLUSH_MS = 10_000;

/**
 * Counts one window switch per blur-then-focus cycle and accumulates
 * active time only while focused, flushing the accumulator on a fixed
 * interval. stop() emits whatever remains so short sessions still report.
 */
export class TelemetryTracker {
  private readonly flushIntervalMs: number;
  private readonly now: () => number;
  private focused = false;
  private everBlurred = false;
  private segmentStart = 0;
  private accumulatedMs = 0;
  private handle: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly options: TelemetryTrackerOptions) {
    this.flushIntervalMs = options.flushIntervalMs ?? DEFAULT_FLUSH_MS;
    this.now = options.now ?? (() => Date.now());
  }

  start(initiallyFocused = true): void {
    this.focused = initiallyFocused;
    this.segmentStart = this.now();
    this.handle = setInterval(() => this.flush(), this.flushIntervalMs);
  }

  focus(): void {
    if (this.focused) return;
    this.focused = true;
    this.segmentStart = this.now();
    if (this.everBlurred) this.options.onFocusCycle();
  }

  blur(): void {
    if (!this.focused) return;
    this.settle();
    this.focused = false;
    this.everBlurred = true;
  }

  /** Fold the open focused segment into the accumulator. */
  private settle(): void {
    if (!this.focused) return;
    const now = this.now();
    this.accumulatedMs += now - this.segmentStart;
    this.segmentStart = now;
  }

  flush(): void {
    this.settle();
    if (this.accumulatedMs > 0) {
      this.options.onActiveTime(Math.round(this.accumulatedMs));
      this.accumulatedMs = 0;
    }
  }

  stop(): void {
    if (this.handle !== null) {
      clearInterval(this.handle);
      this.handle = null;
    }
    this.flush();
  }
}
