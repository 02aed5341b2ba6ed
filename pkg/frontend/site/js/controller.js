/**
 * Session state machine, DOM-free so it can be driven headless in tests.
 *
 * Thin-client contract: every number shown to the operator (batch, means,
 * best item) is taken verbatim from service responses. The controller's
 * only arithmetic is input clamping and the target-screen countdown.
 */
import { ApiError } from "./api.js";
import { allRated, clampRating } from "./rating.js";
const realClock = {
    setTimeout: (fn, ms) => setTimeout(fn, ms),
    clearTimeout: (id) => clearTimeout(id),
    setInterval: (fn, ms) => setInterval(fn, ms),
    clearInterval: (id) => clearInterval(id),
};
export class SessionController {
    api;
    clock;
    targetSeconds;
    minDisplayMs;
    phase = "setup";
    sessionId = null;
    mode = "emotion";
    batch = [];
    iteration = 0;
    maxIterations = 0;
    ratings = new Map();
    inputsEnabled = false;
    progress = [];
    best = null;
    targetRemaining = 0;
    error = null;
    displayTimer = null;
    countdownTimer = null;
    retryAction = null;
    listeners = [];
    constructor(api, options = {}) {
        this.api = api;
        this.clock = options.clock ?? realClock;
        this.targetSeconds = options.targetSeconds ?? 60;
        this.minDisplayMs = options.minDisplayMs ?? 2000;
    }
    subscribe(listener) {
        this.listeners.push(listener);
        return () => {
            this.listeners = this.listeners.filter((l) => l !== listener);
        };
    }
    view() {
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
    canSubmit() {
        return (this.phase === "rating" &&
            this.inputsEnabled &&
            allRated(this.batch.map((b) => b.item_id), this.ratings));
    }
    async start(mode, corpus, seed, engine) {
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
            }
            else {
                this.enterRating(created.batch);
            }
        });
    }
    /** Rebuild a mid-flight session after a page reload. */
    async restore(sessionId) {
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
    setRating(itemId, value) {
        if (this.phase !== "rating" || !this.inputsEnabled)
            return;
        if (!this.batch.some((b) => b.item_id === itemId))
            return;
        this.ratings.set(itemId, clampRating(value));
        this.emit();
    }
    async submit() {
        if (!this.canSubmit() || this.sessionId === null)
            return;
        const sessionId = this.sessionId;
        const payload = {};
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
            }
            else {
                this.enterRating(out.batch ?? []);
            }
        }
        catch (err) {
            if (err instanceof ApiError && err.code === "conflict") {
                // someone else committed this step; drop our inputs and resync
                await this.resync(sessionId);
                return;
            }
            this.fail(err, () => this.submit());
        }
    }
    async retry() {
        const action = this.retryAction;
        if (this.phase !== "error" || action === null)
            return;
        this.error = null;
        this.retryAction = null;
        await action();
    }
    dispose() {
        this.stopTimers();
        this.listeners = [];
    }
    // ------------------------------------------------------------ internals
    async guarded(action) {
        try {
            await action();
        }
        catch (err) {
            this.fail(err, () => this.guarded(action));
        }
    }
    async resync(sessionId) {
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
            }
            else {
                this.enterRating(current.batch ?? []);
            }
        }
        catch (err) {
            this.fail(err, () => this.resync(sessionId));
        }
    }
    enterTarget(firstBatch) {
        this.stopTimers();
        this.phase = "target";
        this.targetRemaining = this.targetSeconds;
        this.emit();
        this.countdownTimer = this.clock.setInterval(() => {
            this.targetRemaining -= 1;
            if (this.targetRemaining <= 0) {
                this.enterRating(firstBatch);
            }
            else {
                this.emit();
            }
        }, 1000);
    }
    enterRating(batch) {
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
    enterDone(best) {
        this.stopTimers();
        this.phase = "done";
        this.batch = [];
        this.ratings = new Map();
        this.inputsEnabled = false;
        if (best)
            this.best = best;
        this.emit();
    }
    fail(err, retryAction) {
        this.stopTimers();
        this.phase = "error";
        this.error = err instanceof Error ? err.message : String(err);
        this.retryAction = retryAction;
        this.emit();
    }
    stopTimers() {
        if (this.displayTimer !== null) {
            this.clock.clearTimeout(this.displayTimer);
            this.displayTimer = null;
        }
        if (this.countdownTimer !== null) {
            this.clock.clearInterval(this.countdownTimer);
            this.countdownTimer = null;
        }
    }
    emit() {
        const snapshot = this.view();
        for (const listener of this.listeners) {
            listener(snapshot);
        }
    }
}
