/**
 * Session view state. Pure transitions over data received from the server;
 * no belief math happens here, only bookkeeping of the last acknowledged
 * server payloads.
 */

import type {
  EntropyPoint,
  QuestionPayload,
  RankedAlternative,
  ResponseAck,
  SessionCreated,
} from "./api.js";

export interface SessionView {
  sessionId: string;
  step: number;
  question: QuestionPayload | null;
  entropy: EntropyPoint[];
  ranking: RankedAlternative[];
  error: string | null;
  busy: boolean;
}

export function initialView(created: SessionCreated): SessionView {
  return {
    sessionId: created.session_id,
    step: created.step,
    question: null,
    // the analytic step-0 baseline anchors the chart
    entropy: [{ step: 0, bits: created.entropy_bits, se: 0 }],
    ranking: [],
    error: null,
    busy: false,
  };
}

export function withQuestion(view: SessionView, question: QuestionPayload): SessionView {
  return { ...view, question, error: null };
}

export function withAck(view: SessionView, ack: ResponseAck): SessionView {
  const entropy = [...view.entropy, { step: ack.step, bits: ack.entropy_bits, se: ack.entropy_se }];
  return {
    ...view,
    step: ack.step,
    question: null,
    entropy,
    ranking: ack.top_alternatives.slice(0, 10),
    error: null,
  };
}

export function withError(view: SessionView, message: string): SessionView {
  return { ...view, error: message };
}

export function withBusy(view: SessionView, busy: boolean): SessionView {
  return { ...view, busy };
}

/** Label for a card: title when present, else id plus a feature preview. */
export function cardLabel(card: { id: string; title: string | null; features: number[] }): string {
  if (card.title) {
    return card.title;
  }
  const preview = card.features
    .slice(0, 4)
    .map((x) => x.toFixed(2))
    .join(", ");
  const ellipsis = card.features.length > 4 ? ", …" : "";
  return `${card.id} [${preview}${ellipsis}]`;
}
