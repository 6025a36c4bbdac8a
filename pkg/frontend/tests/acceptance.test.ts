// @vitest-environment happy-dom
/**
 * Scripted round trip against the real backend: ten answers through the
 * rendered UI must create exactly ten response events server-side, a
 * sparkline of eleven points, and rendered entropy values that match the
 * state endpoint.
 */
import { spawn, ChildProcess } from "node:child_process";
import { mkdtempSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { SessionApi } from "../src/api.js";
import { SessionController } from "../src/ui.js";

const PORT = 18760 + (process.pid % 1000);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;

async function waitForServer(timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const res = await fetch(`${BASE}/healthz`);
      if (res.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 250));
  }
  throw new Error("backend did not come up");
}

function catalogLines(count: number, d: number): string {
  const lines: string[] = [];
  let state = 12345;
  const rand = () => {
    // deterministic LCG so reruns ingest the identical catalog
    state = (state * 48271) % 2147483647;
    return state / 2147483647 - 0.5;
  };
  for (let i = 0; i < count; i++) {
    const features = Array.from({ length: d }, () => Number((rand() * 2).toFixed(6)));
    lines.push(JSON.stringify({ id: `item-${i}`, title: `Item ${i}`, features }));
  }
  return lines.join("\n");
}

beforeAll(async () => {
  const dataDir = mkdtempSync(join(tmpdir(), "preflearn-ui-"));
  server = spawn(
    "preflearn",
    ["serve", "--addr", `127.0.0.1:${PORT}`, "--data", dataDir],
    { stdio: "ignore" },
  );
  await waitForServer();
}, 40_000);

afterAll(() => {
  server?.kill();
});

describe("ui round trip", () => {
  it("ten answers produce ten events, an 11-point sparkline, and matching numbers", async () => {
    const api = new SessionApi(BASE);
    const catalog = await api.ingestCatalog(catalogLines(30, 3));
    const created = await api.createSession({
      catalog_ref: catalog.catalog_ref,
      policy: {
        policy: "entropy_pursuit",
        m: 2,
        subsample_size: 8,
        decision_samples: 800,
        burn_in: 200,
        thinning: 2,
      },
      channel: { symmetric: { m: 2, alpha: 0.7 } },
      prior: { mean: 0, covariance: { scale: 1 } },
      seed: 42,
    });

    document.body.innerHTML = '<div id="root"></div>';
    const root = document.getElementById("root")!;
    const controller = new SessionController(api, root, created);
    await controller.start();

    for (let k = 0; k < 10; k++) {
      expect(root.querySelectorAll(".choice-card").length).toBe(2);
      const choice = (k % 2) + 1;
      await controller.answer(choice);
    }

    // sparkline: baseline + ten acknowledged points
    expect(controller.view.entropy).toHaveLength(11);
    expect(root.querySelectorAll(".entropy-dot")).toHaveLength(11);
    expect(root.textContent).toContain("answered: 10");

    // server truth: exactly ten response events, entropy values identical
    const state = await api.getState(created.session_id);
    expect(state.step).toBe(10);
    expect(state.entropy).toHaveLength(11);
    const eventsRes = await fetch(`${BASE}/sessions/${created.session_id}/state`);
    const full = (await eventsRes.json()) as { events: { type: string }[] };
    const responses = full.events.filter((e) => e.type === "response");
    expect(responses).toHaveLength(10);

    for (let k = 0; k < 11; k++) {
      expect(controller.view.entropy[k]!.bits).toBeCloseTo(state.entropy[k]!.bits, 12);
      expect(controller.view.entropy[k]!.se).toBeCloseTo(state.entropy[k]!.se, 12);
    }
    // the rendered latest-entropy label shows the same number
    const label = root.querySelector(".entropy-latest")!.textContent!;
    expect(label).toContain(state.entropy[10]!.bits.toFixed(3));

    // a stale-token double submit server-side stays idempotent through the UI
    const before = responses.length;
    const q = await api.getQuestion(created.session_id);
    await api.submitResponse(created.session_id, q.question_token, 1);
    await api.submitResponse(created.session_id, q.question_token, 1);
    const again = (await (await fetch(`${BASE}/sessions/${created.session_id}/state`)).json()) as {
      events: { type: string }[];
    };
    expect(again.events.filter((e) => e.type === "response")).toHaveLength(before + 1);
  }, 120_000);
});
