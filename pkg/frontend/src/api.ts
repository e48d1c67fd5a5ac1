// Typed client for the co-writing session API, plus an ordered event outbox
// that buffers while offline and replays in order on reconnect.

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface TelemetryView {
  shown: number;
  accepted: number;
  modified: number;
  rejected: number;
  window_switches: number;
  active_ms: number;
  acceptance_rate: number | null;
}

export interface SuggestionView {
  suggestion_id: string;
  content: string;
  paradigm: string;
  prompt_hash: string;
  created_at: number;
}

export interface SessionView {
  session_id: string;
  paradigm: string;
  text: string;
  pending: SuggestionView | null;
  stage: string;
  progress: number;
  idle_threshold_s: number | null;
  telemetry: TelemetryView;
  created_at: number;
}

export type FeedbackKind = 'accept' | 'modify' | 'reject';

export type EditorEvent =
  | { type: 'feedback'; suggestion_id: string; kind: FeedbackKind; final_text?: string }
  | { type: 'typed_text'; text: string }
  | { type: 'deletion'; offset: number; removed: string }
  | { type: 'focus_change' }
  | { type: 'active_time'; active_ms: number };

export interface EventAck {
  status: string;
  text: string;
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
    this.name = 'ApiError';
  }
}

/** Stale or missing feedback target (HTTP 409). */
export class ConflictError extends ApiError {
  constructor(detail: string) {
    super(409, detail);
    this.name = 'ConflictError';
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === 'string') return body.detail;
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${response.status}`;
}

export class ApiClient {
  private readonly fetchLike: FetchLike;

  constructor(readonly baseUrl: string, fetchLike?: FetchLike) {
    this.fetchLike = fetchLike ?? ((url, init) => fetch(url, init));
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const response = await this.fetchLike(`${this.baseUrl}${path}`, {
      ...init,
      headers: { 'content-type': 'application/json', ...(init?.headers ?? {}) },
    });
    if (response.status === 409) throw new ConflictError(await errorDetail(response));
    if (!response.ok && response.status !== 204) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response;
  }

  /** POST returns only the id; fetch the full view right after. */
  async createSession(paradigm: string, initialText = ''): Promise<SessionView> {
    const response = await this.request('/sessions', {
      method: 'POST',
      body: JSON.stringify({ paradigm, initial_text: initialText }),
    });
    const created: { session_id: string } = await response.json();
    return this.getSession(created.session_id);
  }

  async getSession(sessionId: string): Promise<SessionView> {
    const response = await this.request(`/sessions/${sessionId}`);
    return response.json();
  }

  /** Idle-timer path; null when the server declines (204). */
  async requestSuggestion(
    sessionId: string,
    idleMs: number,
    progress?: number,
  ): Promise<SuggestionView | null> {
    const body: { idle_ms: number; progress?: number } = { idle_ms: idleMs };
    if (progress !== undefined) body.progress = progress;
    const response = await this.request(`/sessions/${sessionId}/suggestion`, {
      method: 'POST',
      body: JSON.stringify(body),
    });
    return response.status === 204 ? null : response.json();
  }

  /** Explicit request; the only suggestion path for L0. */
  async demandSuggestion(sessionId: string): Promise<SuggestionView | null> {
    const response = await this.request(`/sessions/${sessionId}/suggestion:demand`, {
      method: 'POST',
      body: JSON.stringify({}),
    });
    return response.status === 204 ? null : response.json();
  }

  async postEvent(sessionId: string, event: EditorEvent): Promise<EventAck> {
    const response = await this.request(`/sessions/${sessionId}/events`, {
      method: 'POST',
      body: JSON.stringify(event),
    });
    return response.json();
  }
}

export type OutboxStatus = 'idle' | 'sending' | 'offline';

export interface OutboxOptions {
  post: (event: EditorEvent) => Promise<EventAck>;
  /** Called per acknowledged event with the server's resulting document. */
  onAck?: (event: EditorEvent, text: string) => void;
  /** Stale feedback (409): the event is dropped, replay continues. */
  onConflict?: (event: EditorEvent) => void;
  onStatus?: (status: OutboxStatus) => void;
  /** Retry delays while offline; the last entry repeats. */
  backoffMs?: number[];
}

const DEFAULT_BACKOFF = [500, 1000, 2000, 4000, 8000];

/**
 * FIFO queue over postEvent. Events always reach the server in enqueue
 * order; a network failure parks the queue and replays it, still in order,
 * once a retry gets through. Server-side rejections (4xx) drop the single
 * offending event rather than poisoning the queue.
 */
export class EventOutbox {
  private readonly queue: EditorEvent[] = [];
  private readonly backoff: number[];
  private attempt = 0;
  private running = false;
  private retryHandle: ReturnType<typeof setTimeout> | null = null;
  private status: OutboxStatus = 'idle';

  constructor(private readonly options: OutboxOptions) {
    this.backoff = options.backoffMs ?? DEFAULT_BACKOFF;
  }

  get size(): number {
    return this.queue.length;
  }

  enqueue(event: EditorEvent): void {
    this.queue.push(event);
    if (!this.running && this.retryHandle === null) void this.flush();
  }

  private setStatus(status: OutboxStatus): void {
    if (status !== this.status) {
      this.status = status;
      this.options.onStatus?.(status);
    }
  }

  private async flush(): Promise<void> {
    this.running = true;
    this.setStatus('sending');
    while (this.queue.length > 0) {
      const event = this.queue[0]!;
      try {
        const ack = await this.options.post(event);
        this.queue.shift();
        this.attempt = 0;
        this.options.onAck?.(event, ack.text);
      } catch (error) {
        if (error instanceof ConflictError) {
          this.queue.shift();
          this.options.onConflict?.(event);
          continue;
        }
        if (error instanceof ApiError) {
          // the server understood and refused: this event can never succeed
          this.queue.shift();
          continue;
        }
        // network failure: keep the event, come back with backoff
        const delay = this.backoff[Math.min(this.attempt, this.backoff.length - 1)]!;
        this.attempt += 1;
        this.running = false;
        this.setStatus('offline');
        this.retryHandle = setTimeout(() => {
          this.retryHandle = null;
          void this.flush();
        }, delay);
        return;
      }
    }
    this.running = false;
    this.setStatus('idle');
  }

  dispose(): void {
    if (this.retryHandle !== null) {
      clearTimeout(this.retryHandle);
      this.retryHandle = null;
    }
  }
}
