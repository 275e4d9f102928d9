/**
 * Thin client for the task API. All aggregation stays server-side; this
 * module only moves JSON and implements the retry rule for flaky networks:
 * a submission that failed in transit is retried with the SAME page token,
 * and a duplicate response on a retry means the first attempt landed, so it
 * is reported as success rather than an error.
 */
import { parseQuestionPage, parseSubmitAck, type QuestionPage, type SubmitAck } from "./types.js";

export type FetchLike = typeof fetch;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorMessage(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { error?: unknown };
    if (typeof body.error === "string") return body.error;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${response.status}`;
}

export interface ApiClientOptions {
  fetchFn?: FetchLike;
  /** extra attempts after a network failure (not after an HTTP error) */
  retries?: number;
  retryDelayMs?: number;
}

export class ApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;
  private readonly retries: number;
  private readonly retryDelayMs: number;

  constructor(baseUrl: string, options: ApiClientOptions = {}) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = options.fetchFn ?? fetch;
    this.retries = options.retries ?? 3;
    this.retryDelayMs = options.retryDelayMs ?? 250;
  }

  patchUrl(taskId: string): string {
    return `${this.baseUrl}/patches/${encodeURIComponent(taskId)}.png`;
  }

  /** Resolve the next question page, or null when no work is available. */
  async nextPage(workerId: string): Promise<QuestionPage | null> {
    const response = await this.fetchFn(
      `${this.baseUrl}/workers/${encodeURIComponent(workerId)}/next-page`,
    );
    if (response.status === 204) return null;
    if (!response.ok) throw new ApiError(response.status, await errorMessage(response));
    return parseQuestionPage(await response.json());
  }

  /**
   * Submit page answers in task order. Network failures are retried with the
   * same token; an HTTP 409 on a retry is the server telling us the earlier
   * attempt was applied, which counts as exactly one accepted effect.
   */
  async submitAnswers(
    pageToken: string,
    workerId: string,
    answers: boolean[],
    elapsedMs: number,
  ): Promise<SubmitAck> {
    const url = `${this.baseUrl}/pages/${encodeURIComponent(pageToken)}/answers`;
    const body = JSON.stringify({ workerId, answers, elapsedMs });
    let attempt = 0;
    for (;;) {
      attempt += 1;
      let response: Response;
      try {
        response = await this.fetchFn(url, {
          method: "POST",
          headers: { "content-type": "application/json" },
          body,
        });
      } catch (err) {
        if (attempt > this.retries) throw err;
        await new Promise((resolve) => setTimeout(resolve, this.retryDelayMs));
        continue;
      }
      if (response.status === 409 && attempt > 1) {
        return { status: "accepted", deduplicated: true };
      }
      if (!response.ok) throw new ApiError(response.status, await errorMessage(response));
      return parseSubmitAck(await response.json());
    }
  }

  async submitPolygon(
    imageId: string,
    workerId: string,
    points: ReadonlyArray<readonly [number, number]>,
    elapsedMs: number,
  ): Promise<{ accepted: boolean }> {
    const response = await this.fetchFn(`${this.baseUrl}/polygons`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ imageId, workerId, points, elapsedMs }),
    });
    if (!response.ok) throw new ApiError(response.status, await errorMessage(response));
    return (await response.json()) as { accepted: boolean };
  }
}
