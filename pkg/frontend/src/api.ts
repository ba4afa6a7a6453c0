/**
 * Typed client for the case service HTTP API.
 *
 * Every number the console renders comes out of these responses verbatim;
 * the console itself never computes probabilities.
 */

export interface TimelinePoint {
  t: number;
  predicted: Record<string, number>;
  posterior: Record<string, number>;
  score: number;
  rho: Record<string, number | string>;
  log_lik_ratio: Record<string, number | string>;
  flat_evidence: boolean;
}

export interface Timeline {
  case_id: string;
  model_id?: string;
  points: TimelinePoint[];
}

export interface CaseSummary {
  case_id: string;
  model_id: string;
  created: string;
  t: number;
  score: number;
}

export interface ModelSummary {
  model_id: string;
  label: string;
  states: string[];
}

export interface ModelDocument {
  model_id: string;
  document: {
    label?: string;
    states: { id: string; name: string }[];
    observables: { id: string; name: string }[];
    tasks: { id: string; name: string }[];
    [key: string]: unknown;
  };
}

export interface IngestSummary {
  case_id: string;
  t: number;
  posterior: Record<string, number>;
  score: number;
  rho: Record<string, number | string>;
  journal_seq: number;
}

export interface WhatIfEntry {
  t: number;
  values?: Record<string, number>;
  tasks?: Record<string, number>;
  note?: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(url: string, method: string, body?: unknown): Promise<T> {
  let response: Response;
  try {
    response = await fetch(url, {
      method,
      headers: body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  } catch (err) {
    throw new ApiError(0, "UNREACHABLE", `service unreachable: ${String(err)}`);
  }
  const text = await response.text();
  let doc: unknown = null;
  try {
    doc = text ? JSON.parse(text) : null;
  } catch {
    throw new ApiError(response.status, "BAD_RESPONSE", `non-JSON response (${response.status})`);
  }
  if (!response.ok) {
    const e = doc as { code?: string; message?: string } | null;
    throw new ApiError(response.status, e?.code ?? "ERROR", e?.message ?? `HTTP ${response.status}`);
  }
  return doc as T;
}

export class Client {
  constructor(readonly baseUrl: string) {}

  private url(path: string): string {
    return this.baseUrl.replace(/\/$/, "") + path;
  }

  registerModel(document: unknown): Promise<{ model_id: string }> {
    return request(this.url("/models"), "POST", document);
  }

  listModels(): Promise<{ models: ModelSummary[] }> {
    return request(this.url("/models"), "GET");
  }

  getModel(modelId: string): Promise<ModelDocument> {
    return request(this.url(`/models/${modelId}`), "GET");
  }

  listCases(): Promise<{ cases: CaseSummary[] }> {
    return request(this.url("/cases"), "GET");
  }

  createCase(modelId: string): Promise<IngestSummary & { model_id: string }> {
    return request(this.url("/cases"), "POST", { model_id: modelId });
  }

  postObservation(
    caseId: string,
    t: number,
    values: Record<string, number>,
  ): Promise<IngestSummary> {
    return request(this.url(`/cases/${caseId}/observations`), "POST", { t, values });
  }

  postEvidence(
    caseId: string,
    t: number,
    tasks: Record<string, number>,
    note?: string,
  ): Promise<IngestSummary> {
    return request(this.url(`/cases/${caseId}/evidence`), "POST", { t, tasks, note });
  }

  getTimeline(caseId: string): Promise<Timeline> {
    return request(this.url(`/cases/${caseId}/timeline`), "GET");
  }

  whatIf(caseId: string, entries: WhatIfEntry[]): Promise<Timeline> {
    return request(this.url(`/cases/${caseId}/whatif`), "POST", { entries });
  }
}
