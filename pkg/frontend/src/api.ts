/** Typed client for the annotation API; fetch is injectable for tests. */

import type {
  JudgmentPayload,
  NextBatchResponse,
  RaterSummary,
  SubmitResponse,
} from "./types.js";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface SubmitOutcome {
  /** True when the server already had this (task, rater) judgment. */
  duplicate: boolean;
  response: SubmitResponse | null;
}

async function parseError(response: Response): Promise<ApiError> {
  let code = "UnknownError";
  let message = response.statusText;
  try {
    const body = (await response.json()) as { error?: { code?: string; message?: string } };
    code = body.error?.code ?? code;
    message = body.error?.message ?? message;
  } catch {
    // non-JSON error body; keep the status text
  }
  return new ApiError(response.status, code, message);
}

export class AnnotationApi {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  async nextBatch(raterId: string): Promise<NextBatchResponse> {
    const response = await this.fetchFn(
      this.url(`/batches/next?rater=${encodeURIComponent(raterId)}`),
    );
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as NextBatchResponse;
  }

  /** Duplicate submissions resolve (duplicate: true) instead of throwing, so
   *  retries after a lost response are always safe. */
  async submitJudgment(payload: JudgmentPayload): Promise<SubmitOutcome> {
    const response = await this.fetchFn(this.url("/judgments"), {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
    if (response.status === 409) {
      return { duplicate: true, response: null };
    }
    if (!response.ok) throw await parseError(response);
    return { duplicate: false, response: (await response.json()) as SubmitResponse };
  }

  async raterSummary(raterId: string): Promise<RaterSummary | null> {
    const response = await this.fetchFn(
      this.url(`/raters/${encodeURIComponent(raterId)}/summary`),
    );
    if (response.status === 404) return null;
    if (!response.ok) throw await parseError(response);
    return (await response.json()) as RaterSummary;
  }
}
