/**
 * DOM rendering and the answer flow.
 *
 * One controller owns a session: it renders the last acknowledged server
 * state, serializes submissions (a second click while a request is in
 * flight is dropped client-side; the server's token idempotency catches
 * anything that slips through), and recovers from token conflicts by
 * re-fetching the pending question.
 */

import { ApiError, SessionApi } from "./api.js";
import type { SessionCreated } from "./api.js";
import { sparklineGeometry } from "./sparkline.js";
import {
  SessionView,
  cardLabel,
  initialView,
  withAck,
  withBusy,
  withError,
  withQuestion,
} from "./state.js";

const SPARK_WIDTH = 360;
const SPARK_HEIGHT = 72;

export class SessionController {
  view: SessionView;
  private inFlight = false;

  constructor(
    private readonly api: SessionApi,
    private readonly root: HTMLElement,
    created: SessionCreated,
    private readonly doc: Document = document,
  ) {
    this.view = initialView(created);
  }

  async start(): Promise<void> {
    await this.loadQuestion();
  }

  async loadQuestion(): Promise<void> {
    try {
      const question = await this.api.getQuestion(this.view.sessionId);
      this.view = withQuestion(this.view, question);
    } catch (err) {
      this.view = withError(this.view, describe(err));
    }
    this.render();
  }

  /** Submit the highlighted choice (1-based). Drops re-entrant calls. */
  async answer(choice: number): Promise<void> {
    const question = this.view.question;
    if (this.inFlight || !question) {
      return;
    }
    if (choice < 1 || choice > question.alternatives.length) {
      return;
    }
    this.inFlight = true;
    this.view = withBusy(this.view, true);
    this.render();
    try {
      const ack = await this.api.submitResponse(
        this.view.sessionId,
        question.question_token,
        choice,
      );
      this.view = withAck(this.view, ack);
      const next = await this.api.getQuestion(this.view.sessionId);
      this.view = withQuestion(this.view, next);
    } catch (err) {
      if (err instanceof ApiError && err.code === "conflict") {
        // stale token: adopt the server's pending question
        if (err.pendingQuestion) {
          this.view = withQuestion(this.view, err.pendingQuestion);
        } else {
          await this.loadQuestion();
        }
      } else {
        this.view = withError(this.view, describe(err));
      }
    } finally {
      this.inFlight = false;
      this.view = withBusy(this.view, false);
      this.render();
    }
  }

  /** Re-sync entropy, ranking, and step from the state endpoint. */
  async refresh(): Promise<void> {
    try {
      const state = await this.api.getState(this.view.sessionId);
      this.view = {
        ...this.view,
        step: state.step,
        entropy: state.entropy,
        ranking: state.ranking.slice(0, 10),
        error: null,
      };
    } catch (err) {
      this.view = withError(this.view, describe(err));
    }
    this.render();
  }

  render(): void {
    const v = this.view;
    this.root.innerHTML = "";
    this.root.append(
      this.renderHeader(),
      this.renderError(),
      this.renderCards(),
      this.renderSparkline(),
      this.renderRanking(),
    );
    this.wireCards();
  }

  private el<K extends keyof HTMLElementTagNameMap>(
    tag: K,
    className?: string,
    text?: string,
  ): HTMLElementTagNameMap[K] {
    const node = this.doc.createElement(tag);
    if (className) node.className = className;
    if (text !== undefined) node.textContent = text;
    return node;
  }

  private renderHeader(): HTMLElement {
    const header = this.el("div", "session-header");
    header.append(
      this.el("span", "session-id", `session ${this.view.sessionId}`),
      this.el("span", "step-counter", `answered: ${this.view.step}`),
    );
    return header;
  }

  private renderError(): HTMLElement {
    const banner = this.el("div", "error-banner");
    if (this.view.error) {
      banner.textContent = this.view.error;
      const retry = this.el("button", "retry-button", "retry");
      retry.addEventListener("click", () => void this.loadQuestion());
      banner.append(retry);
    } else {
      banner.style.display = "none";
    }
    return banner;
  }

  private renderCards(): HTMLElement {
    const wrap = this.el("div", "choice-cards");
    const question = this.view.question;
    if (!question) {
      wrap.append(this.el("p", "placeholder", this.view.busy ? "thinking…" : "no question"));
      return wrap;
    }
    question.alternatives.forEach((alt, index) => {
      const card = this.el("button", "choice-card");
      card.dataset.choice = String(index + 1);
      card.disabled = this.view.busy;
      card.setAttribute("aria-keyshortcuts", String(index + 1));
      card.append(
        this.el("span", "card-key", `${index + 1}`),
        this.el("span", "card-label", cardLabel(alt)),
      );
      wrap.append(card);
    });
    return wrap;
  }

  private renderSparkline(): HTMLElement {
    const wrap = this.el("div", "entropy-panel");
    wrap.append(this.el("h3", undefined, "posterior entropy (bits)"));
    const geometry = sparklineGeometry(this.view.entropy, SPARK_WIDTH, SPARK_HEIGHT);
    const svg = this.doc.createElementNS("http://www.w3.org/2000/svg", "svg");
    svg.setAttribute("viewBox", `0 0 ${SPARK_WIDTH} ${SPARK_HEIGHT}`);
    svg.setAttribute("class", "entropy-sparkline");
    for (const bar of geometry.errorBars) {
      const line = this.doc.createElementNS("http://www.w3.org/2000/svg", "line");
      line.setAttribute("x1", bar.x.toFixed(2));
      line.setAttribute("x2", bar.x.toFixed(2));
      line.setAttribute("y1", bar.y1.toFixed(2));
      line.setAttribute("y2", bar.y2.toFixed(2));
      line.setAttribute("class", "error-bar");
      svg.append(line);
    }
    if (geometry.path) {
      const path = this.doc.createElementNS("http://www.w3.org/2000/svg", "path");
      path.setAttribute("d", geometry.path);
      path.setAttribute("fill", "none");
      path.setAttribute("class", "entropy-path");
      svg.append(path);
    }
    for (const pt of geometry.points) {
      const dot = this.doc.createElementNS("http://www.w3.org/2000/svg", "circle");
      dot.setAttribute("cx", pt.x.toFixed(2));
      dot.setAttribute("cy", pt.y.toFixed(2));
      dot.setAttribute("r", "2");
      dot.setAttribute("class", "entropy-dot");
      svg.append(dot);
    }
    wrap.append(svg);
    const latest = this.view.entropy[this.view.entropy.length - 1];
    if (latest) {
      wrap.append(
        this.el(
          "span",
          "entropy-latest",
          `${latest.bits.toFixed(3)} ± ${latest.se.toFixed(3)} bits`,
        ),
      );
    }
    return wrap;
  }

  private renderRanking(): HTMLElement {
    const wrap = this.el("div", "ranking-panel");
    wrap.append(this.el("h3", undefined, "current top 10"));
    const list = this.el("ol", "ranking-list");
    for (const item of this.view.ranking) {
      list.append(
        this.el("li", "ranking-item", `${item.title ?? item.id} (${item.score.toFixed(3)})`),
      );
    }
    wrap.append(list);
    return wrap;
  }

  private wireCards(): void {
    this.root.querySelectorAll<HTMLButtonElement>(".choice-card").forEach((card) => {
      card.addEventListener("click", () => {
        void this.answer(Number(card.dataset.choice));
      });
    });
  }
}

function describe(err: unknown): string {
  if (err instanceof ApiError) {
    return `${err.code}: ${err.message}`;
  }
  return err instanceof Error ? err.message : String(err);
}
