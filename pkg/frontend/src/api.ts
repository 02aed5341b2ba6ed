/** Thin typed client over the four session endpoints. */

import type {
  BatchResponse,
  CreateRequest,
  CreateResponse,
  RatingsResponse,
  StateResponse,
} from "./types.js";

export type FetchLike = (
  input: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string },
) => Promise<{ ok: boolean; status: number; json(): Promise<unknown> }>;

export class ApiError extends Error {
  readonly status: number;
  readonly code: string;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.status = status;
    this.code = code;
  }
}

async function unwrap<T>(
  res: Awaited<ReturnType<FetchLike>>,
): Promise<T> {
  if (res.ok) {
    return (await res.json()) as T;
  }
  let code = "unknown";
  let message = `request failed with status ${res.status}`;
  try {
    const body = (await res.json()) as { code?: string; message?: string };
    if (body.code) code = body.code;
    if (body.message) message = body.message;
  } catch {
    // non-JSON error body; keep the status-line message
  }
  throw new ApiError(res.status, code, message);
}

export class SessionApi {
  private readonly base: string;
  private readonly fetchImpl: FetchLike;

  /** `base` is the service origin, e.g. "" for same-origin or a full URL. */
  constructor(base: string, fetchImpl: FetchLike) {
    this.base = base.replace(/\/$/, "");
    this.fetchImpl = fetchImpl;
  }

  async createSession(req: CreateRequest): Promise<CreateResponse> {
    const res = await this.fetchImpl(`${this.base}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(req),
    });
    return unwrap<CreateResponse>(res);
  }

  async submitRatings(
    sessionId: string,
    ratings: Record<string, number>,
  ): Promise<RatingsResponse> {
    const res = await this.fetchImpl(
      `${this.base}/sessions/${sessionId}/ratings`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ ratings }),
      },
    );
    return unwrap<RatingsResponse>(res);
  }

  async getBatch(sessionId: string): Promise<BatchResponse> {
    const res = await this.fetchImpl(`${this.base}/sessions/${sessionId}/batch`);
    return unwrap<BatchResponse>(res);
  }

  async getState(sessionId: string): Promise<StateResponse> {
    const res = await this.fetchImpl(`${this.base}/sessions/${sessionId}/state`);
    return unwrap<StateResponse>(res);
  }
}
