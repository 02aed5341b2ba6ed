/**
 * End-to-end: a scripted browser session against the real service.
 *
 * Spawns the rating service, boots the page in jsdom, and plays a
 * deterministic synthetic rater through the UI's own controls for a full
 * 10-batch session. Every request leaves through an intercepted fetch, so
 * the test can audit that the client only ever ships raw ratings and
 * renders numbers the service computed.
 */
import { spawn, type ChildProcess } from "node:child_process";

import { JSDOM } from "jsdom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import type { FetchLike } from "../src/api.js";
import { startApp, type AppHandles } from "../src/main.js";
import type { StateResponse } from "../src/types.js";

const PORT = 8700 + (process.pid % 280);
const BASE = `http://127.0.0.1:${PORT}`;

const SERVICE_SCRIPT = `
import sys, tempfile
import uvicorn
from stimloop.service import ServiceConfig, create_app

config = ServiceConfig(
    data_dir=tempfile.mkdtemp(prefix="stimloop-e2e-"),
    corpora={"default": {"n_clusters": 12, "members": 5, "dim": 16,
                         "spread": 0.25, "seed": 7}},
)
uvicorn.run(create_app(config), host="127.0.0.1", port=int(sys.argv[1]),
            log_level="warning")
`;

let service: ChildProcess;

interface Recorded {
  method: string;
  path: string;
  body: unknown;
}

const audit: Recorded[] = [];

const auditedFetch: FetchLike = async (input, init) => {
  audit.push({
    method: init?.method ?? "GET",
    path: input.replace(BASE, ""),
    body: init?.body === undefined ? undefined : JSON.parse(init.body),
  });
  const res = await fetch(input, init);
  return { ok: res.ok, status: res.status, json: () => res.json() };
};

/** Deterministic rater: FNV-1a of "(item, step)" folded onto the 0.01 grid. */
function syntheticRating(itemId: string, step: number): number {
  const key = `${itemId}:${step}`;
  let h = 0x811c9dc5;
  for (let i = 0; i < key.length; i++) {
    h ^= key.charCodeAt(i);
    h = Math.imul(h, 0x01000193) >>> 0;
  }
  return (h % 101) / 100;
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

async function until(cond: () => boolean, what: string, ms = 15_000): Promise<void> {
  const deadline = Date.now() + ms;
  while (!cond()) {
    if (Date.now() > deadline) throw new Error(`timed out waiting for ${what}`);
    await sleep(5);
  }
}

beforeAll(async () => {
  service = spawn("python3", ["-c", SERVICE_SCRIPT, String(PORT)], {
    stdio: ["ignore", "inherit", "inherit"],
  });
  const deadline = Date.now() + 60_000;
  for (;;) {
    try {
      await fetch(`${BASE}/sessions/probe/state`);
      break; // any HTTP answer means the server is up
    } catch {
      if (Date.now() > deadline) throw new Error("service never came up");
      await sleep(100);
    }
  }
});

afterAll(() => {
  service?.kill("SIGKILL");
});

describe("full session through the page", () => {
  let dom: JSDOM;
  let doc: Document;
  let app: AppHandles;

  const fire = (el: Element, type: string) =>
    el.dispatchEvent(new dom.window.Event(type, { bubbles: true, cancelable: true }));

  it("completes 10 batches driven by the synthetic rater", async () => {
    dom = new JSDOM(
      `<!doctype html><html><body><main id="app"></main></body></html>`,
      { url: "http://localhost/" },
    );
    doc = dom.window.document;
    app = startApp(
      dom.window as unknown as Window & typeof globalThis,
      BASE,
      auditedFetch,
      { minDisplayMs: 10 }, // keep the per-image gate, shrink it for CI
    );

    doc.querySelector<HTMLSelectElement>("#mode")!.value = "emotion";
    doc.querySelector<HTMLInputElement>("#seed")!.value = "11";
    doc.querySelector<HTMLInputElement>("#batch-size")!.value = "10";
    doc.querySelector<HTMLInputElement>("#iterations")!.value = "10";
    fire(doc.querySelector("#setup")!, "submit");
    await until(() => doc.querySelector("#rating") !== null, "first batch");

    for (let step = 1; step <= 10; step++) {
      await until(
        () => doc.querySelector<HTMLInputElement>(".rating-slider")?.disabled === false,
        `step ${step} inputs`,
      );
      const cards = [...doc.querySelectorAll<HTMLElement>(".card")];
      expect(cards).toHaveLength(10);
      for (const card of cards) {
        const slider = card.querySelector<HTMLInputElement>(".rating-slider")!;
        slider.value = String(synthetic(card, step));
        fire(slider, "input");
      }
      await until(
        () => doc.querySelector<HTMLButtonElement>("#submit")?.disabled === false,
        `step ${step} submit`,
      );
      fire(doc.querySelector("#rating")!, "submit");
      await until(
        () =>
          doc.querySelector("#done") !== null ||
          doc.querySelector("h2")?.textContent === `Step ${step + 1} of 10`,
        `step ${step} advance`,
      );
    }

    expect(doc.querySelector("#done")).not.toBeNull();
  });

  it("draws the 10-step progress chart straight from service means", async () => {
    const chart = doc.querySelector("#chart-box")!;
    expect(chart.getAttribute("data-len")).toBe("10");
    expect(chart.querySelectorAll("circle")).toHaveLength(10);

    // the series on screen is exactly the series the service reports
    const sessionId = app.controller.view().sessionId!;
    const state = (await (
      await fetch(`${BASE}/sessions/${sessionId}/state`)
    ).json()) as StateResponse;
    expect(state.mean_ratings).toHaveLength(10);
    expect(app.controller.view().progress).toEqual(state.mean_ratings);
  });

  it("shows the service-reported best item on the final screen", async () => {
    const sessionId = app.controller.view().sessionId!;
    const state = (await (
      await fetch(`${BASE}/sessions/${sessionId}/state`)
    ).json()) as StateResponse;

    expect(state.done).toBe(true);
    expect(state.best_item).not.toBeNull();
    expect(doc.querySelector("#best-id")!.textContent).toBe(
      state.best_item!.item_id,
    );
    expect(doc.querySelector("#best-reward")!.textContent).toBe(
      state.best_item!.reward.toFixed(3),
    );
  });

  it("audits the wire: only session endpoints, only raw ratings outbound", () => {
    const allowed = [
      /^POST \/sessions$/,
      /^POST \/sessions\/[0-9a-f]+\/ratings$/,
      /^GET \/sessions\/[0-9a-f]+\/batch$/,
      /^GET \/sessions\/[0-9a-f]+\/state$/,
    ];
    for (const req of audit) {
      const line = `${req.method} ${req.path}`;
      expect(allowed.some((re) => re.test(line)), line).toBe(true);
    }

    const creates = audit.filter((r) => r.path === "/sessions");
    expect(creates).toHaveLength(1);
    expect(Object.keys(creates[0]!.body as object).sort()).toEqual([
      "corpus",
      "engine",
      "mode",
      "seed",
    ]);

    const submits = audit.filter((r) => r.path.endsWith("/ratings"));
    expect(submits).toHaveLength(10);
    for (const req of submits) {
      const body = req.body as { ratings: Record<string, number> };
      // nothing but the ratings map ever leaves the rating screen
      expect(Object.keys(body)).toEqual(["ratings"]);
      const values = Object.values(body.ratings);
      expect(values).toHaveLength(10);
      for (const v of values) {
        expect(v).toBeGreaterThanOrEqual(0);
        expect(v).toBeLessThanOrEqual(1);
        expect(Math.round(v * 100) / 100).toBe(v); // 0.01 granularity
      }
      // no score/probability/config fields smuggled alongside
      expect(body).not.toHaveProperty("scores");
      expect(body).not.toHaveProperty("probs");
      expect(body).not.toHaveProperty("engine");
    }
  });
});

function synthetic(card: HTMLElement, step: number): number {
  return syntheticRating(card.dataset["itemId"] ?? "", step);
}
