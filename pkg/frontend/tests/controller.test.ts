import { describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { SessionController } from "../src/controller.js";
import type { BestItem } from "../src/types.js";

import { FakeBackend, TestClock, flush, mkBatch } from "./helpers.js";

const BEST: BestItem = { item_id: "s1-i2", payload: null, reward: 0.91 };

function setup(steps = 3, batch = 4) {
  const backend = new FakeBackend(
    Array.from({ length: steps }, (_, s) => ({
      batch: mkBatch(s, batch),
      mean: 0.4 + s / 10,
    })),
    BEST,
  );
  const clock = new TestClock();
  const controller = new SessionController(new SessionApi("", backend.fetch), {
    clock,
    minDisplayMs: 2000,
    targetSeconds: 60,
  });
  return { backend, clock, controller };
}

function rateAll(controller: SessionController, value = 0.5): void {
  for (const item of controller.view().batch) {
    controller.setRating(item.item_id, value);
  }
}

describe("start", () => {
  it("emotion mode goes straight to rating with gated inputs", async () => {
    const { clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    let v = controller.view();
    expect(v.phase).toBe("rating");
    expect(v.batch).toHaveLength(4);
    expect(v.inputsEnabled).toBe(false);

    clock.advance(1999);
    expect(controller.view().inputsEnabled).toBe(false);
    clock.advance(1);
    v = controller.view();
    expect(v.inputsEnabled).toBe(true);
    expect(v.canSubmit).toBe(false); // nothing rated yet
  });

  it("mental-match shows the memorization screen for the full minute", async () => {
    const { clock, controller } = setup();
    await controller.start("mental-match", "default", 0, {});
    expect(controller.view().phase).toBe("target");
    expect(controller.view().targetRemaining).toBe(60);

    clock.advance(59_000);
    expect(controller.view().phase).toBe("target");
    expect(controller.view().targetRemaining).toBe(1);

    clock.advance(1000);
    expect(controller.view().phase).toBe("rating");
  });

  it("network failure surfaces inline and retry recovers", async () => {
    const { backend, clock, controller } = setup();
    backend.failNextCreate = true;
    await controller.start("emotion", "default", 0, {});
    const v = controller.view();
    expect(v.phase).toBe("error");
    expect(v.error).toContain("network down");

    await controller.retry();
    expect(controller.view().phase).toBe("rating");
    clock.advance(2000);
    expect(controller.view().inputsEnabled).toBe(true);
  });
});

describe("rating and submit", () => {
  it("ignores input before the display delay and clamps after", async () => {
    const { clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    controller.setRating("s0-i0", 0.7);
    expect(controller.view().ratings.size).toBe(0);

    clock.advance(2000);
    controller.setRating("s0-i0", 1.7);
    controller.setRating("s0-i1", -0.2);
    controller.setRating("not-in-batch", 0.5);
    const v = controller.view();
    expect(v.ratings.get("s0-i0")).toBe(1);
    expect(v.ratings.get("s0-i1")).toBe(0);
    expect(v.ratings.has("not-in-batch")).toBe(false);
  });

  it("enables submit only once every item is rated", async () => {
    const { clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    clock.advance(2000);
    const ids = controller.view().batch.map((b) => b.item_id);
    for (const id of ids.slice(0, -1)) {
      controller.setRating(id, 0.6);
      expect(controller.view().canSubmit).toBe(false);
    }
    controller.setRating(ids[ids.length - 1]!, 0.6);
    expect(controller.view().canSubmit).toBe(true);
  });

  it("advances with server-reported means taken verbatim", async () => {
    const { backend, clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    clock.advance(2000);
    rateAll(controller, 0.9); // scripted means below ignore what we sent
    await controller.submit();

    let v = controller.view();
    expect(v.phase).toBe("rating");
    expect(v.iteration).toBe(1);
    expect(v.progress).toEqual([0.4]);
    expect(v.ratings.size).toBe(0); // fresh batch, no carried ratings
    expect(v.inputsEnabled).toBe(false); // display gate re-arms

    clock.advance(2000);
    rateAll(controller, 0.1);
    await controller.submit();
    v = controller.view();
    expect(v.progress).toEqual([0.4, 0.5]);
    expect(backend.requests.filter((r) => r.path.endsWith("/ratings"))).toHaveLength(2);
  });

  it("freezes inputs while a submit is in flight", async () => {
    const { clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    clock.advance(2000);
    rateAll(controller, 0.5);
    const pending = controller.submit();
    expect(controller.view().phase).toBe("submitting");
    controller.setRating("s0-i0", 0.01); // revision after submit is refused
    expect(controller.view().ratings.get("s0-i0")).toBe(0.5);
    await pending;
  });

  it("finishes on done with the service's best item", async () => {
    const { clock, controller } = setup(2, 3);
    await controller.start("emotion", "default", 0, {});
    for (const value of [0.2, 0.8]) {
      clock.advance(2000);
      rateAll(controller, value);
      await controller.submit();
    }
    const v = controller.view();
    expect(v.phase).toBe("done");
    expect(v.best).toEqual(BEST);
    expect(v.progress).toEqual([0.4, 0.5]);
  });
});

describe("conflict handling", () => {
  it("a lost double-submit race resyncs to the server's batch", async () => {
    const { backend, clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    clock.advance(2000);
    rateAll(controller);
    backend.conflictNextSubmit = true;
    await controller.submit();

    const v = controller.view();
    expect(v.phase).toBe("rating");
    expect(v.error).toBeNull();
    expect(v.iteration).toBe(1); // the other submit advanced the session
    expect(v.batch[0]!.item_id).toBe("s1-i0");
    expect(v.progress).toEqual([0.4]);
  });
});

describe("restore", () => {
  it("rebuilds a mid-flight session from state + batch", async () => {
    const { backend, clock, controller } = setup();
    await controller.start("emotion", "default", 0, {});
    clock.advance(2000);
    rateAll(controller);
    await controller.submit();

    const revived = new SessionController(
      new SessionApi("", backend.fetch),
      { clock, minDisplayMs: 0 },
    );
    await revived.restore("f00dface");
    const v = revived.view();
    expect(v.phase).toBe("rating");
    expect(v.iteration).toBe(1);
    expect(v.progress).toEqual([0.4]);
    expect(v.batch[0]!.item_id).toBe("s1-i0");
  });

  it("lands on the summary when the session already finished", async () => {
    const { backend, clock, controller } = setup(1, 2);
    await controller.start("emotion", "default", 0, {});
    clock.advance(2000);
    rateAll(controller);
    await controller.submit();

    const revived = new SessionController(
      new SessionApi("", backend.fetch),
      { clock: new TestClock() },
    );
    await revived.restore("f00dface");
    expect(revived.view().phase).toBe("done");
    expect(revived.view().best).toEqual(BEST);
  });
});

describe("thin-client audit at the unit level", () => {
  it("sends only ratings bodies; no derived quantities leave the client", async () => {
    const { backend, clock, controller } = setup(1, 3);
    await controller.start("emotion", "default", 7, { batch_size: 3 });
    clock.advance(2000);
    rateAll(controller, 0.33);
    await controller.submit();
    await flush();

    const posts = backend.requests.filter((r) => r.method === "POST");
    expect(Object.keys(posts[0]!.body as object).sort()).toEqual([
      "corpus",
      "engine",
      "mode",
      "seed",
    ]);
    expect(Object.keys(posts[1]!.body as object)).toEqual(["ratings"]);
    const ratings = (posts[1]!.body as { ratings: Record<string, number> })
      .ratings;
    expect(Object.values(ratings)).toEqual([0.33, 0.33, 0.33]);
  });
});
