/** Thin client for the annotation service HTTP API. */

import type { AnnotationCase, SubmissionRecord } from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public missing?: string[],
  ) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string,
    private token: string,
  ) {}

  private headers(): Record<string, string> {
    return {
      "Content-Type": "application/json",
      Authorization: `Bearer ${this.token}`,
    };
  }

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await fetch(`${this.baseUrl}${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    const doc = (await resp.json()) as Record<string, unknown>;
    if (!resp.ok) {
      throw new ApiError(
        resp.status,
        String(doc.error ?? resp.statusText),
        doc.missing as string[] | undefined,
      );
    }
    return doc as T;
  }

  async getCases(params: { cohort?: string; keyword?: string } = {}): Promise<AnnotationCase[]> {
    const query = new URLSearchParams();
    if (params.cohort) query.set("cohort", params.cohort);
    if (params.keyword) query.set("keyword", params.keyword);
    const suffix = query.toString() ? `?${query}` : "";
    const doc = await this.request<{ cases: AnnotationCase[] }>("GET", `/cases${suffix}`);
    return doc.cases;
  }

  async getCase(caseId: string): Promise<AnnotationCase> {
    return this.request<AnnotationCase>("GET", `/cases/${encodeURIComponent(caseId)}`);
  }

  async getDraft(key: string): Promise<SubmissionRecord | null> {
    try {
      return await this.request<SubmissionRecord>(
        "GET",
        `/submissions?key=${encodeURIComponent(key)}`,
      );
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) return null;
      throw err;
    }
  }

  async putDraft(submission: Record<string, unknown>): Promise<SubmissionRecord> {
    return this.request<SubmissionRecord>("PUT", "/submissions", submission);
  }

  async finalize(key: string): Promise<SubmissionRecord> {
    return this.request<SubmissionRecord>(
      "POST",
      `/submissions/${encodeURIComponent(key)}/finalize`,
    );
  }

  async exportRows(experiment: string): Promise<Record<string, unknown>[]> {
    const doc = await this.request<{ rows: Record<string, unknown>[] }>(
      "GET",
      `/export?experiment=${encodeURIComponent(experiment)}`,
    );
    return doc.rows;
  }
}
