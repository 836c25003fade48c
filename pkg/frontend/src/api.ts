import type { IterationSummary, JudgmentPayload, SessionConfig, SessionSummary } from "./types.js";

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

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, init);
  let body: any = null;
  try {
    body = await response.json();
  } catch {
    // non-JSON error bodies fall through to the generic message
  }
  if (!response.ok) {
    const code = body?.code ?? "unknown-error";
    const message = body?.message ?? `request failed with status ${response.status}`;
    throw new ApiError(response.status, code, message);
  }
  return body as T;
}

/** Thin typed client for the session service. The console never computes
 * scores or aggregates itself; everything shown comes from these calls. */
export class ServiceClient {
  constructor(readonly baseUrl: string = "") {}

  createSession(query: string, config: SessionConfig = {}): Promise<{ id: string }> {
    return request(`${this.baseUrl}/sessions`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ query, config }),
    });
  }

  getSession(id: string): Promise<SessionSummary> {
    return request(`${this.baseUrl}/sessions/${encodeURIComponent(id)}`);
  }

  listSessions(): Promise<{ sessions: SessionSummary[] }> {
    return request(`${this.baseUrl}/sessions`);
  }

  getIterations(id: string): Promise<{ iterations: IterationSummary[] }> {
    return request(`${this.baseUrl}/sessions/${encodeURIComponent(id)}/iterations`);
  }

  artifactUrl(artifactId: string): string {
    return `${this.baseUrl}/artifacts/${encodeURIComponent(artifactId)}/html`;
  }

  submitAnnotation(judgment: JudgmentPayload): Promise<{ id: string }> {
    return request(`${this.baseUrl}/annotations`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(judgment),
    });
  }
}
