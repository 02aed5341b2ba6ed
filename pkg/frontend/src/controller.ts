/**
 * Session state machine, DOM-free so it can be driven headless in tests.
 *
 * Thin-client contract: every number shown to the operator (batch, means,
 * best item) is taken verbatim from service responses. The controller's
 * only arithmetic is input clamping and the target-screen countdown.
 */

import { ApiError, SessionApi } from "./api.js";
import { allRated, clampRating } from "./rating.js";
import type { BatchItem, BestItem, EngineConfig, Mode } from "./types.js";

export type Phase =
  | "setup"
  | "target"
  | "rating"
  | "submitting"
  | "done"
  | "error";

/** Injectable timers so tests can run the clock by hand. */
export interface Clock {
  setTimeout(fn: () => void, ms: number): number;
  clearTimeout(id: number): void;
  setInterval(fn: () => void, ms: number): number;
  clearInterval(id: number): void;
}

const realClock: Clock = {
  setTimeout: (fn, ms) => setTimeout(fn, ms) as unknown as number,
  clearTimeout: (id) => clearTimeout(id),
  setInterval: (fn, ms) => setInterval(fn, ms) as unknown as number,
  clearInterval: (id) => clearInterval(id),
};

export interface ControllerOptions {
  /** Target-memorization screen duration (mental-match only). */
  targetSeconds?: number;
  /** Images must stay on screen this long before inputs enable. */
  minDisplayMs?: number;
  clock?: Clock;
}

/** Immutable snapshot handed to renderers. */
export interface View {
  phase: Phase;
  sessionId: string | null;
  mode: Mode;
  batch: BatchItem[];
  iteration: number;
  maxIterations: number;
  ratings: Map<string, number>;
  inputsEnabled: boolean;
  canSubmit: boolean;
  progress: number[];
  best: BestItem | null;
  targetRemaining: number;
  error: string | null;
}

export class SessionController {
  private readonly api: SessionApi;
  private readonly clock: Clock;
  private readonly targetSeconds: number;
  private readonly minDisplayMs: number;

  private phase: Phase = "setup";
  private sessionId: string | null = null;
  private mode: Mode = "emotion";
  private batch: BatchItem[] = [];
  private iteration = 0;
  private maxIterations = 0;
  private ratings = new Map<string, number>();
  private inputsEnabled = false;
  private progress: number[] = [];
  private best: BestItem | null = null;
  private targetRemaining = 0;
  private error: string | null = null;

  private displayTimer: number | null = null;
  private countdownTimer: number | null = null;
  private retryAction: (() => Promise<void>) | null = null;
  private listeners: Array<(view: View) => void> = [];

  constructor(api: SessionApi, options: ControllerOptions = {}) {
    this.api = api;
    this.clock = options.clock ?? realClock;
    this.targetSeconds = options.targetSeconds ?? 60;
    this.minDisplayMs = options.minDisplayMs ?? 2000;
  }

  subscribe(listener: (view: View) => void): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  view(): View {
    return {
      phase: this.phase,
      sessionId: this.sessionId,
      mode: this.mode,
      batch: [...this.batch],
      iteration: this.iteration,
      maxIterations: this.maxIterations,
      ratings: new Map(this.ratings),
      inputsEnabled: this.inputsEnabled,
      canSubmit: this.canSubmit(),
      progress: [...this.progress],
      best: this.best,
      targetRemaining: this.targetRemaining,
      error: this.error,
    };
  }

  canSubmit(): boolean {
    return (
      this.phase === "rating" &&
      this.inputsEnabled &&
      allRated(this.batch.map((b) => b.item_id), this.ratings)
    );
  }

  async start(
    mode: Mode,
    corpus: string,
    seed: number,
    engine: EngineConfig,
  ): Promise<void> {
    await this.guarded(async () => {
      const created = await this.api.createSession({
        mode,
        corpus,
        seed,
        engine,
      });
      this.sessionId = created.session_id;
      this.mode = created.mode;
      this.iteration = created.iteration;
      this.maxIterations = created.max_iterations;
      this.progress = [];
      this.best = null;
      if (created.mode === "mental-match" && this.targetSeconds > 0) {
        this.enterTarget(created.batch);
      } else {
        this.enterRating(created.batch);
      }
    });
  }

  /** Rebuild a mid-flight session after a page reload. */
  async restore(sessionId: string): Promise<void> {
    await this.guarded(async () => {
      const state = await this.api.getState(sessionId);
      this.sessionId = sessionId;
      this.mode = state.mode;
      this.iteration = state.iteration;
      this.maxIterations = state.max_iterations;
      this.progress = [...state.mean_ratings];
      this.best = state.best_item;
      if (state.done) {
        this.enterDone(state.best_item);
        return;
      }
      const current = await this.api.getBatch(sessionId);
      if (current.done) {
        this.enterDone(current.best_item ?? state.best_item);
        return;
      }
      // a restored session never replays the memorization screen
      this.enterRating(current.batch ?? []);
    });
  }

  setRating(itemId: string, value: number): void {
    if (this.phase !== "rating" || !this.inputsEnabled) return;
    if (!this.batch.some((b) => b.item_id === itemId)) return;
    this.ratings.set(itemId, clampRating(value));
    this.emit();
  }

  async submit(): Promise<void> {
    if (!this.canSubmit() || this.sessionId === null) return;
    const sessionId = this.sessionId;
    const payload: Record<string, number> = {};
    for (const item of this.batch) {
      payload[item.item_id] = this.ratings.get(item.item_id) ?? 0;
    }
    this.phase = "submitting";
    this.inputsEnabled = false;
    this.emit();
    try {
      const out = await this.api.submitRatings(sessionId, payload);
      this.iteration = out.iteration;
      this.progress = [...out.mean_ratings];
      if (out.done) {
        this.enterDone(out.best_item ?? null);
      } else {
        this.enterRating(out.batch ?? []);
      }
    } catch (err) {
      if (err instanceof ApiError && err.code === "conflict") {
        // someone else committed this step; drop our inputs and resync
        await this.resync(sessionId);
        return;
      }
      this.fail(err, () => this.submit());
    }
  }

  async retry(): Promise<void> {
    const action = this.retryAction;
    if (this.phase !== "error" || action === null) return;
    this.error = null;
    this.retryAction = null;
    await action();
  }

  dispose(): void {
    this.stopTimers();
    this.listeners = [];
  }

  // ------------------------------------------------------------ internals

  private async guarded(action: () => Promise<void>): Promise<void> {
    try {
      await action();
    } catch (err) {
      this.fail(err, () => this.guarded(action));
    }
  }

  private async resync(sessionId: string): Promise<void> {
    try {
      const state = await this.api.getState(sessionId);
      this.iteration = state.iteration;
      this.progress = [...state.mean_ratings];
      this.best = state.best_item;
      if (state.done) {
        this.enterDone(state.best_item);
        return;
      }
      const current = await this.api.getBatch(sessionId);
      if (current.done) {
        this.enterDone(current.best_item ?? state.best_item);
      } else {
        this.enterRating(current.batch ?? []);
      }
    } catch (err) {
      this.fail(err, () => this.resync(sessionId));
    }
  }

  private enterTarget(firstBatch: BatchItem[]): void {
    this.stopTimers();
    this.phase = "target";
    this.targetRemaining = this.targetSeconds;
    this.emit();
    this.countdownTimer = this.clock.setInterval(() => {
      this.targetRemaining -= 1;
      if (this.targetRemaining <= 0) {
        this.enterRating(firstBatch);
      } else {
        this.emit();
      }
    }, 1000);
  }

  private enterRating(batch: BatchItem[]): void {
    this.stopTimers();
    this.phase = "rating";
    this.batch = batch;
    this.ratings = new Map();
    this.inputsEnabled = this.minDisplayMs === 0;
    this.error = null;
    this.emit();
    if (!this.inputsEnabled) {
      this.displayTimer = this.clock.setTimeout(() => {
        this.inputsEnabled = true;
        this.emit();
      }, this.minDisplayMs);
    }
  }

  private enterDone(best: BestItem | null | undefined): void {
    this.stopTimers();
    this.phase = "done";
    this.batch = [];
    this.ratings = new Map();
    this.inputsEnabled = false;
    if (best) this.best = best;
    this.emit();
  }

  private fail(err: unknown, retryAction: () => Promise<void>): void {
    this.stopTimers();
    this.phase = "error";
    this.error = err instanceof Error ? err.message : String(err);
    this.retryAction = retryAction;
    this.emit();
  }

  private stopTimers(): void {
    if (this.displayTimer !== null) {
      this.clock.clearTimeout(this.displayTimer);
      this.displayTimer = null;
    }
    if (this.countdownTimer !== null) {
      this.clock.clearInterval(this.countdownTimer);
      this.countdownTimer = null;
    }
  }

  private emit(): void {
    const snapshot = this.view();
    for (const listener of this.listeners) {
      listener(snapshot);
    }
  }
}
