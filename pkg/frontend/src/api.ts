/** Typed client for the engine's HTTP API. Every call goes through one
 * request helper so the JSON error envelope maps onto ApiError uniformly. */

export interface EntityRefJson {
  source: string;
  localId: string;
  label: string;
  description?: string;
  uri?: string;
}

export interface AutocompleteGroup {
  source: string;
  status: string;
  refs: EntityRefJson[];
}

export interface CatalogPage {
  id: string;
  title: string;
  class: string | null;
}

export interface CatalogInfo {
  id: string;
  label?: string;
  pages: CatalogPage[];
}

export interface HealthDoc {
  status: string;
  schemaVersion: string;
  sources: Record<string, string>;
}

export interface CreatedSession {
  sessionId: string;
  catalog: string;
  schemaVersion: string;
  pages: CatalogPage[];
}

export interface SessionItem {
  key: string;
  class: string;
  refs: EntityRefJson[];
  fields: Record<string, string>;
  relations: Record<string, string[]>;
}

export interface SessionPublication {
  record: {
    doi: string;
    url: string;
    title: string;
    authors: { name: string; orcid: string }[];
    venue: string;
    year: number | null;
    [extra: string]: unknown;
  };
  linkedItemKeys: string[];
}

export interface SessionDoc {
  sessionId: string;
  catalog: string;
  items: SessionItem[];
  publications?: SessionPublication[];
  [extra: string]: unknown;
}

export interface InsertedItem {
  key: string;
  class: string;
  label: string;
  page: string;
}

export interface SelectReport {
  key: string;
  reused: boolean;
  resolution: unknown;
  populatedFields: string[];
  insertedItems: InsertedItem[];
  warnings: string[];
}

export interface Violation {
  itemKey: string;
  kind: string;
  detail: string;
  severity: string;
}

export interface ValidationReport {
  sessionId: string;
  passed: boolean;
  violations: Violation[];
}

export interface PreviewField {
  name: string;
  value: string;
  provenance?: string;
}

export interface PreviewRelation {
  relation: string;
  targets: { key: string; label: string }[];
}

export interface PreviewItem {
  key: string;
  class: string;
  label: string;
  refs: EntityRefJson[];
  fields: PreviewField[];
  relations: PreviewRelation[];
}

export interface PreviewSection {
  page: string;
  title: string;
  items: PreviewItem[];
}

export interface PreviewDoc {
  kind: string;
  sessionId: string;
  catalog: string;
  sections?: PreviewSection[];
  publications?: { citation: string; linkedItems: string[] }[];
  queryText?: string;
}

export interface SinkSpec {
  type: string;
  source: string;
}

export interface ExportSummary {
  createOps: number;
  statementOps: number;
}

export interface ExportResult {
  dryRun: boolean;
  summary: ExportSummary;
  plan?: unknown;
  queries?: string[];
  receipt?: Record<string, unknown>;
  pidsWrittenBack?: Record<string, EntityRefJson>;
}

export interface SearchFilter {
  kind: string;
  [extra: string]: unknown;
}

export interface SearchSpecJson {
  target: string;
  filters: SearchFilter[];
  sources?: string[];
  limit?: number;
}

export interface SearchRow {
  ref: EntityRefJson;
  matchedFilters: string[];
}

export interface SearchResult {
  queryText: string;
  rows: SearchRow[];
  perSourceStatus: Record<string, string>;
  summary: string;
}

export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly detail?: unknown,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

interface Envelope {
  error?: { code?: string; message?: string; detail?: unknown };
}

/** The slice of Client the widgets depend on; tests substitute fakes. */
export interface ClientLike {
  catalogs(): Promise<{ catalogs: CatalogInfo[]; schemaVersion: string }>;
  createSession(catalog: string, sessionId?: string): Promise<CreatedSession>;
  sessionDoc(sessionId: string): Promise<SessionDoc>;
  select(sessionId: string, page: string, choice: EntityRefJson | string): Promise<SelectReport>;
  setField(sessionId: string, key: string, field: string, value: string): Promise<unknown>;
  link(sessionId: string, fromKey: string, relation: string, toKey: string): Promise<unknown>;
  intra(sessionId: string, fromKey: string, relation: string, toKey: string): Promise<unknown>;
  addPublication(sessionId: string, doi: string, linkedItemKeys: string[]): Promise<unknown>;
  validation(sessionId: string): Promise<ValidationReport>;
  preview(sessionId: string): Promise<PreviewDoc>;
  exportSession(sessionId: string, sink: SinkSpec, dryRun: boolean, token?: string): Promise<ExportResult>;
  autocomplete(query: string, className: string, limit?: number): Promise<AutocompleteGroup[]>;
  search(spec: SearchSpecJson): Promise<SearchResult>;
}

export class Client implements ClientLike {
  constructor(readonly base: string = "") {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      init.headers = { "content-type": "application/json" };
      init.body = JSON.stringify(body);
    }
    const response = await fetch(this.base + path, init);
    const text = await response.text();
    let doc: unknown = null;
    try {
      doc = text ? JSON.parse(text) : null;
    } catch {
      doc = null;
    }
    if (!response.ok) {
      const envelope = (doc ?? {}) as Envelope;
      const err = envelope.error ?? {};
      throw new ApiError(
        err.code ?? `http-${response.status}`,
        err.message ?? (text || response.statusText),
        response.status,
        err.detail,
      );
    }
    return doc as T;
  }

  health(): Promise<HealthDoc> {
    return this.request("GET", "/health");
  }

  catalogs(): Promise<{ catalogs: CatalogInfo[]; schemaVersion: string }> {
    return this.request("GET", "/catalogs");
  }

  createSession(catalog: string, sessionId?: string): Promise<CreatedSession> {
    const payload: Record<string, string> = { catalog };
    if (sessionId) payload.sessionId = sessionId;
    return this.request("POST", "/sessions", payload);
  }

  /** Stored session document, byte for byte. */
  async sessionText(sessionId: string): Promise<string> {
    const response = await fetch(`${this.base}/sessions/${encodeURIComponent(sessionId)}`);
    const text = await response.text();
    if (!response.ok) {
      let code = `http-${response.status}`;
      let message = text || response.statusText;
      try {
        const err = (JSON.parse(text) as Envelope).error;
        if (err) {
          code = err.code ?? code;
          message = err.message ?? message;
        }
      } catch {
        /* not an envelope */
      }
      throw new ApiError(code, message, response.status);
    }
    return text;
  }

  async sessionDoc(sessionId: string): Promise<SessionDoc> {
    return JSON.parse(await this.sessionText(sessionId)) as SessionDoc;
  }

  select(sessionId: string, page: string, choice: EntityRefJson | string): Promise<SelectReport> {
    const payload: Record<string, unknown> = { page };
    if (typeof choice === "string") payload.label = choice;
    else payload.ref = choice;
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/select`, payload);
  }

  setField(sessionId: string, key: string, field: string, value: string): Promise<unknown> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/fields`, { key, field, value });
  }

  link(sessionId: string, fromKey: string, relation: string, toKey: string): Promise<unknown> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/relations`, {
      fromKey,
      relation,
      toKey,
    });
  }

  intra(sessionId: string, fromKey: string, relation: string, toKey: string): Promise<unknown> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/intra-relations`, {
      fromKey,
      relation,
      toKey,
    });
  }

  addPublication(sessionId: string, doi: string, linkedItemKeys: string[]): Promise<unknown> {
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/publications`, {
      doi,
      linkedItemKeys,
    });
  }

  validation(sessionId: string): Promise<ValidationReport> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/validation`);
  }

  preview(sessionId: string): Promise<PreviewDoc> {
    return this.request("GET", `/sessions/${encodeURIComponent(sessionId)}/preview`);
  }

  exportSession(sessionId: string, sink: SinkSpec, dryRun: boolean, token?: string): Promise<ExportResult> {
    const payload: Record<string, unknown> = { sink, dryRun };
    if (token) payload.token = token;
    return this.request("POST", `/sessions/${encodeURIComponent(sessionId)}/export`, payload);
  }

  async autocomplete(query: string, className: string, limit?: number): Promise<AutocompleteGroup[]> {
    const params = new URLSearchParams({ q: query, class: className });
    if (limit !== undefined) params.set("limit", String(limit));
    const doc = await this.request<{ groups: AutocompleteGroup[] }>("GET", `/autocomplete?${params}`);
    return doc.groups;
  }

  search(spec: SearchSpecJson): Promise<SearchResult> {
    return this.request("POST", "/search", spec);
  }
}
