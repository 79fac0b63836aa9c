import { DispatchApi } from "./api.js";
import type { AssignmentPush } from "./api.js";

export interface SubscriptionOptions {
  /** Server-side wait per long-poll round, seconds. */
  timeoutS?: number;
  /** Delay before retrying after a transport error, ms. */
  retryMs?: number;
  onAssignment: (push: AssignmentPush) => void;
  onStatus?: (connected: boolean) => void;
}

/**
 * Long-poll loop for one ESC's assignment channel.
 *
 * Each round asks the server to park the request until something is
 * pending; an empty reply just means the wait timed out and we go again.
 * Transport errors back off and retry so a service restart self-heals.
 */
export class AssignmentSubscription {
  private running = false;
  private controller: AbortController | null = null;
  private timer: ReturnType<typeof setTimeout> | null = null;

  constructor(
    private readonly api: DispatchApi,
    readonly escId: string,
    private readonly opts: SubscriptionOptions,
  ) {}

  start(): void {
    if (this.running) return;
    this.running = true;
    void this.loop();
  }

  stop(): void {
    this.running = false;
    if (this.timer !== null) clearTimeout(this.timer);
    this.controller?.abort();
  }

  private async loop(): Promise<void> {
    const timeoutS = this.opts.timeoutS ?? 25;
    const retryMs = this.opts.retryMs ?? 1000;
    while (this.running) {
      this.controller = new AbortController();
      try {
        const pushes = await this.api.pollAssignments(
          this.escId,
          timeoutS,
          this.controller.signal,
        );
        if (!this.running) return;
        this.opts.onStatus?.(true);
        for (const push of pushes) {
          this.opts.onAssignment(push);
        }
      } catch {
        if (!this.running) return;
        this.opts.onStatus?.(false);
        await this.sleep(retryMs);
      }
    }
  }

  private sleep(ms: number): Promise<void> {
    return new Promise((resolve) => {
      this.timer = setTimeout(resolve, ms);
    });
  }
}

/** Plain interval fallback for panes with no push channel (the board). */
export class IntervalRefresher {
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    private readonly fn: () => void,
    private readonly ms: number,
  ) {}

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(this.fn, this.ms);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
