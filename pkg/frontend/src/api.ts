/**
 * Typed client for the elicitation session API.
 *
 * Every displayed number round-trips through these calls; the client does no
 * probabilistic computation of its own. Mutations are idempotent server-side:
 * re-submitting a response with the same token returns the original ack.
 */

export interface AlternativeCard {
  id: string;
  title: string | null;
  features: number[];
}

export interface QuestionPayload {
  session_id: string;
  step: number;
  question_token: string;
  alternatives: AlternativeCard[];
}

export interface RankedAlternative {
  id: string;
  title: string | null;
  score: number;
}

export interface ResponseAck {
  session_id: string;
  step: number;
  question_token: string;
  entropy_bits: number;
  entropy_se: number;
  top_alternatives: RankedAlternative[];
}

export interface EntropyPoint {
  step: number;
  bits: number;
  se: number;
}

export interface SessionState {
  session_id: string;
  step: number;
  entropy: EntropyPoint[];
  ranking: RankedAlternative[];
  projection: number[][];
  pending_token: string | null;
}

export interface SessionCreated {
  session_id: string;
  step: number;
  entropy_bits: number;
  catalog_count: number;
  d: number;
}

export interface SessionConfig {
  catalog_ref: string;
  policy: {
    policy: string;
    m: number;
    subsample_size: number;
    decision_samples?: number;
    burn_in?: number;
    thinning?: number;
  };
  channel: { symmetric: { m: number; alpha: number } };
  prior: { mean: number; covariance: { scale: number } };
  seed: number;
}

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly pendingQuestion: QuestionPayload | null;

  constructor(status: number, code: string, message: string,
              pendingQuestion: QuestionPayload | null = null) {
    super(message);
    this.status = status;
    this.code = code;
    this.pendingQuestion = pendingQuestion;
  }
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    let code = "http_error";
    let message = `HTTP ${res.status}`;
    let pending: QuestionPayload | null = null;
    try {
      const body = (await res.json()) as {
        code?: string;
        message?: string;
        pending_question?: QuestionPayload;
      };
      code = body.code ?? code;
      message = body.message ?? message;
      pending = body.pending_question ?? null;
    } catch {
      // non-JSON error body: keep defaults
    }
    throw new ApiError(res.status, code, message, pending);
  }
  return res.json() as Promise<T>;
}

export class SessionApi {
  constructor(private readonly baseUrl: string = "") {}

  async ingestCatalog(text: string): Promise<{ catalog_ref: string; count: number; d: number }> {
    const res = await fetch(`${this.baseUrl}/catalogs`, { method: "POST", body: text });
    return asJson(res);
  }

  async createSession(config: SessionConfig): Promise<SessionCreated> {
    const res = await fetch(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(config),
    });
    return asJson(res);
  }

  async getQuestion(sessionId: string): Promise<QuestionPayload> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/question`);
    return asJson(res);
  }

  async submitResponse(sessionId: string, token: string, choice: number): Promise<ResponseAck> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/response`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ token, choice }),
    });
    return asJson(res);
  }

  async getState(sessionId: string): Promise<SessionState> {
    const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/state`);
    return asJson(res);
  }
}
