// @vitest-environment happy-dom
import { beforeEach, describe, expect, it, vi } from "vitest";

import { ApiError } from "../src/api.js";
import type {
  QuestionPayload,
  ResponseAck,
  SessionApi,
  SessionCreated,
} from "../src/api.js";
import { SessionController } from "../src/ui.js";

const created: SessionCreated = {
  session_id: "s1",
  step: 0,
  entropy_bits: 4.0,
  catalog_count: 10,
  d: 2,
};

function questionAt(step: number, m = 2): QuestionPayload {
  return {
    session_id: "s1",
    step,
    question_token: `q${step}`,
    alternatives: Array.from({ length: m }, (_, i) => ({
      id: `alt-${step}-${i}`,
      title: `Option ${i + 1}`,
      features: [i, step],
    })),
  };
}

function ackAt(step: number): ResponseAck {
  return {
    session_id: "s1",
    step,
    question_token: `q${step}`,
    entropy_bits: 4.0 - step,
    entropy_se: 0.02,
    top_alternatives: [{ id: "alt", title: "Leader", score: 1.0 }],
  };
}

function fakeApi(overrides: Partial<Record<keyof SessionApi, unknown>> = {}) {
  let step = 0;
  const api = {
    getQuestion: vi.fn(async () => questionAt(step + 1)),
    submitResponse: vi.fn(async () => {
      step += 1;
      return ackAt(step);
    }),
    getState: vi.fn(async () => ({
      session_id: "s1",
      step,
      entropy: [{ step: 0, bits: 4.0, se: 0 }],
      ranking: [],
      projection: [],
      pending_token: null,
    })),
    ingestCatalog: vi.fn(),
    createSession: vi.fn(),
    ...overrides,
  };
  return api as unknown as SessionApi;
}

let root: HTMLElement;

beforeEach(() => {
  document.body.innerHTML = '<div id="root"></div>';
  root = document.getElementById("root")!;
});

describe("session controller", () => {
  it("renders one card per alternative", async () => {
    const api = fakeApi({ getQuestion: vi.fn(async () => questionAt(1, 3)) });
    const controller = new SessionController(api, root, created);
    await controller.start();
    expect(root.querySelectorAll(".choice-card")).toHaveLength(3);
    expect(root.textContent).toContain("Option 2");
  });

  it("answer advances the step counter and appends an entropy point", async () => {
    const controller = new SessionController(fakeApi(), root, created);
    await controller.start();
    await controller.answer(1);
    expect(controller.view.step).toBe(1);
    expect(controller.view.entropy).toHaveLength(2);
    expect(root.textContent).toContain("answered: 1");
    expect(root.querySelectorAll(".entropy-dot").length).toBe(2);
  });

  it("a double submission sends exactly one request", async () => {
    const api = fakeApi();
    const controller = new SessionController(api, root, created);
    await controller.start();
    const first = controller.answer(1);
    const second = controller.answer(1); // dropped: request in flight
    await Promise.all([first, second]);
    expect((api.submitResponse as ReturnType<typeof vi.fn>).mock.calls).toHaveLength(1);
    expect(controller.view.step).toBe(1);
  });

  it("out-of-range keys are ignored", async () => {
    const api = fakeApi();
    const controller = new SessionController(api, root, created);
    await controller.start();
    await controller.answer(7);
    expect((api.submitResponse as ReturnType<typeof vi.fn>).mock.calls).toHaveLength(0);
  });

  it("conflict errors adopt the server's pending question", async () => {
    const pending = questionAt(5);
    const api = fakeApi({
      submitResponse: vi.fn(async () => {
        throw new ApiError(409, "conflict", "stale token", pending);
      }),
    });
    const controller = new SessionController(api, root, created);
    await controller.start();
    await controller.answer(1);
    expect(controller.view.question?.question_token).toBe("q5");
    expect(controller.view.error).toBeNull();
  });

  it("failures surface in the error banner without crashing", async () => {
    const api = fakeApi({
      getQuestion: vi.fn(async () => {
        throw new ApiError(500, "internal", "backend down");
      }),
    });
    const controller = new SessionController(api, root, created);
    await controller.start();
    const banner = root.querySelector(".error-banner")!;
    expect(banner.textContent).toContain("backend down");
    expect(root.querySelectorAll(".choice-card")).toHaveLength(0);
  });

  it("clicking a card triggers the submission", async () => {
    const api = fakeApi();
    const controller = new SessionController(api, root, created);
    await controller.start();
    const card = root.querySelector<HTMLButtonElement>(".choice-card")!;
    card.click();
    await vi.waitFor(() => {
      expect(controller.view.step).toBe(1);
    });
  });
});
