import type { ErrorDoc, HealthDoc, JokeResponseDoc } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** A failure reported by the service, carrying its error code and stage. */
export class ApiError extends Error {
  readonly code: string;
  readonly stage: string | null;

  constructor(code: string, stage: string | null, message: string) {
    super(message);
    this.name = "ApiError";
    this.code = code;
    this.stage = stage;
  }
}

export class JokeApiClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl = "", fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  /** POST /api/joke, always asking for the construction trace. */
  async requestJoke(text: string): Promise<JokeResponseDoc> {
    const response = await this.fetchFn(`${this.baseUrl}/api/joke`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ text, trace: true }),
    });
    if (!response.ok) {
      let doc: ErrorDoc;
      try {
        doc = (await response.json()) as ErrorDoc;
      } catch {
        throw new ApiError(`HTTP${response.status}`, null, response.statusText);
      }
      throw new ApiError(doc.error, doc.stage, doc.message);
    }
    return (await response.json()) as JokeResponseDoc;
  }

  async health(): Promise<HealthDoc> {
    const response = await this.fetchFn(`${this.baseUrl}/api/health`);
    if (!response.ok) {
      throw new ApiError(`HTTP${response.status}`, null, response.statusText);
    }
    return (await response.json()) as HealthDoc;
  }
}
