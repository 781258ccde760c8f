/**
 * Thin fetch client for the three service endpoints.
 */

import type { QueryResponse, StepResponse } from "./types";

/** Non-2xx reply; carries the HTTP status and the server's detail text. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = await response.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    // fall through to the status line
  }
  return `${response.status} ${response.statusText}`;
}

async function decode<T>(response: Response): Promise<T> {
  if (!response.ok) {
    throw new ApiError(response.status, await errorDetail(response));
  }
  return (await response.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  async submitQuery(prompt: string, sessionId: string): Promise<QueryResponse> {
    const response = await fetch(`${this.baseUrl}/api/query`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ prompt, session_id: sessionId }),
    });
    return decode<QueryResponse>(response);
  }

  async fetchStep(stepId: string): Promise<StepResponse> {
    const response = await fetch(
      `${this.baseUrl}/api/steps/${encodeURIComponent(stepId)}`,
    );
    return decode<StepResponse>(response);
  }

  async uploadDataset(name: string, file: File): Promise<unknown> {
    const form = new FormData();
    form.append("name", name);
    form.append("file", file);
    const response = await fetch(`${this.baseUrl}/api/data`, {
      method: "POST",
      body: form,
    });
    return decode<unknown>(response);
  }
}
