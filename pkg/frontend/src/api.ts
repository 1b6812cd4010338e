/**
 * Typed client for the labeling-session HTTP API.
 *
 * Every number shown in the UI comes from these responses verbatim; the
 * client never recomputes metrics.
 */

export interface QueryView {
  index: number;
  features: number[];
  feature_names: string[];
  predicted_label: number;
  confidence: number;
  gad: number | null;
  step: number;
  budget: number;
  class_names: string[] | null;
}

export interface MetricsSnapshot {
  step: number;
  errors_found: number;
  sdr: number | null;
  sdr_curve: number[];
  budget: number;
  status: string;
}

export class BudgetExhausted extends Error {}
export class StaleQuery extends Error {}
export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class SessionClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const res = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (res.status === 410) throw new BudgetExhausted("budget exhausted");
    if (res.status === 409) throw new StaleQuery("stale query index");
    if (!res.ok) throw new ApiError(res.status, `${res.status} on ${path}`);
    return res;
  }

  async createSession(config: Record<string, unknown>): Promise<string> {
    const res = await this.request("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(config),
    });
    const body = (await res.json()) as { session_id: string };
    return body.session_id;
  }

  async fetchNext(sessionId: string): Promise<QueryView> {
    const res = await this.request(`/sessions/${sessionId}/next`);
    return (await res.json()) as QueryView;
  }

  async submitLabel(sessionId: string, index: number, label: number): Promise<MetricsSnapshot> {
    const res = await this.request(`/sessions/${sessionId}/label`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ index, label }),
    });
    return (await res.json()) as MetricsSnapshot;
  }

  async getMetrics(sessionId: string): Promise<MetricsSnapshot> {
    const res = await this.request(`/sessions/${sessionId}/metrics`);
    return (await res.json()) as MetricsSnapshot;
  }
}
