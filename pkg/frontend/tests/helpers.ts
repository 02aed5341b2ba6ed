/** Scripted in-memory backend speaking the wire protocol, plus a hand clock. */

import type { FetchLike } from "../src/api.js";
import type { Clock } from "../src/controller.js";
import type { BatchItem, BestItem, Mode } from "../src/types.js";

export interface ScriptedStep {
  batch: BatchItem[];
  /** Mean the server reports after this step is submitted. Deliberately
   *  unrelated to what the client sent: the UI must echo, not compute. */
  mean: number;
}

export function mkBatch(step: number, n: number): BatchItem[] {
  return Array.from({ length: n }, (_, k) => ({
    item_id: `s${step}-i${k}`,
    payload: null,
  }));
}

interface Recorded {
  method: string;
  path: string;
  body?: unknown;
}

export class FakeBackend {
  readonly requests: Recorded[] = [];
  failNextCreate = false;
  conflictNextSubmit = false;

  private readonly steps: ScriptedStep[];
  private readonly best: BestItem;
  private readonly sessionId = "f00dface";
  private mode: Mode = "emotion";
  private iteration = 0;
  private means: number[] = [];

  constructor(steps: ScriptedStep[], best: BestItem) {
    this.steps = steps;
    this.best = best;
  }

  get done(): boolean {
    return this.iteration >= this.steps.length;
  }

  readonly fetch: FetchLike = async (input, init) => {
    const method = init?.method ?? "GET";
    const path = input.replace(/^https?:\/\/[^/]+/, "");
    const body = init?.body === undefined ? undefined : JSON.parse(init.body);
    this.requests.push({ method, path, body });

    if (method === "POST" && path === "/sessions") {
      if (this.failNextCreate) {
        this.failNextCreate = false;
        throw new Error("network down");
      }
      this.mode = (body as { mode: Mode }).mode;
      return ok({
        session_id: this.sessionId,
        mode: this.mode,
        batch: this.steps[0]!.batch,
        iteration: 0,
        max_iterations: this.steps.length,
      });
    }
    if (method === "POST" && path === `/sessions/${this.sessionId}/ratings`) {
      if (this.conflictNextSubmit) {
        // the competing submit won the race and advanced the session
        this.conflictNextSubmit = false;
        this.advance();
        return err(409, "conflict", "another submission is in flight");
      }
      this.advance();
      return ok(this.afterSubmit());
    }
    if (method === "GET" && path === `/sessions/${this.sessionId}/batch`) {
      return ok(
        this.done
          ? { done: true, iteration: this.iteration, best_item: this.best }
          : {
              done: false,
              iteration: this.iteration,
              batch: this.steps[this.iteration]!.batch,
            },
      );
    }
    if (method === "GET" && path === `/sessions/${this.sessionId}/state`) {
      return ok({
        iteration: this.iteration,
        max_iterations: this.steps.length,
        mean_ratings: [...this.means],
        best_item: this.done ? this.best : null,
        entropy: 1.234,
        done: this.done,
        mode: this.mode,
      });
    }
    return err(404, "unknown-session", `no route for ${method} ${path}`);
  };

  private advance(): void {
    this.means.push(this.steps[this.iteration]!.mean);
    this.iteration += 1;
  }

  private afterSubmit() {
    if (this.done) {
      return {
        done: true,
        iteration: this.iteration,
        mean_ratings: [...this.means],
        best_item: this.best,
      };
    }
    return {
      done: false,
      iteration: this.iteration,
      mean_ratings: [...this.means],
      batch: this.steps[this.iteration]!.batch,
    };
  }
}

function ok(body: unknown) {
  return { ok: true, status: 200, json: async () => body };
}

function err(status: number, code: string, message: string) {
  return { ok: false, status, json: async () => ({ code, message }) };
}

/** Deterministic timers driven by advance(); fires in timestamp order. */
export class TestClock implements Clock {
  private now = 0;
  private seq = 1;
  private timers = new Map<
    number,
    { at: number; fn: () => void; every?: number }
  >();

  setTimeout(fn: () => void, ms: number): number {
    const id = this.seq++;
    this.timers.set(id, { at: this.now + ms, fn });
    return id;
  }

  clearTimeout(id: number): void {
    this.timers.delete(id);
  }

  setInterval(fn: () => void, ms: number): number {
    const id = this.seq++;
    this.timers.set(id, { at: this.now + ms, fn, every: ms });
    return id;
  }

  clearInterval(id: number): void {
    this.timers.delete(id);
  }

  advance(ms: number): void {
    const end = this.now + ms;
    for (;;) {
      let nextId: number | null = null;
      let nextAt = Infinity;
      for (const [id, t] of this.timers) {
        if (t.at <= end && t.at < nextAt) {
          nextAt = t.at;
          nextId = id;
        }
      }
      if (nextId === null) break;
      const timer = this.timers.get(nextId)!;
      this.now = timer.at;
      if (timer.every !== undefined) {
        timer.at += timer.every;
      } else {
        this.timers.delete(nextId);
      }
      timer.fn();
    }
    this.now = end;
  }
}

/** Let queued promise continuations run. */
export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}
