/** Typed client for the scoring service's v1 JSON API. */

export interface TxnSummary {
  id: string;
  score: number;
  label: number;
  ts: number;
  part: string;
}

export interface TxnPage {
  v: number;
  total: number;
  items: TxnSummary[];
}

export interface TxnDetail extends TxnSummary {
  v: number;
  features: number[];
}

export interface ExplanationNode {
  id: string;
  type: string;
  label?: number;
  feat_importance: number[];
}

export interface ExplanationEdge {
  src: string;
  dst: string;
  etype: string;
  weight: number;
}

export interface Explanation {
  v: number;
  target: string;
  nodes: ExplanationNode[];
  edges: ExplanationEdge[];
  threshold: number;
}

export interface ExplainJobStatus {
  v: number;
  job_id: string;
  txn_id: string;
  status: "running" | "done" | "failed";
  explanation?: Explanation;
  error?: string;
}

export interface TimelinePoint {
  txn: string;
  ts: number;
  score: number;
  label: number;
}

export interface Timeline {
  v: number;
  entity: string;
  entity_type: string;
  points: TimelinePoint[];
}

export interface Projection {
  v: number;
  ids: string[];
  coords: [number, number][];
  explained_variance: number[];
}

export interface NeighborhoodNode {
  id: string;
  type: string;
  label?: number;
  score?: number;
}

export interface Neighborhood {
  v: number;
  center: string;
  nodes: NeighborhoodNode[];
  edges: { src: string; dst: string; etype: string }[];
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchImpl(this.baseUrl + path, init);
    const body = await res.json().catch(() => ({}));
    if (!res.ok) {
      throw new ApiError(res.status, (body as { error?: string }).error ?? res.statusText);
    }
    return body as T;
  }

  health(): Promise<{ v: number; status: string }> {
    return this.request("/health");
  }

  transactions(opts: {
    part?: string;
    sort?: "score" | "ts";
    order?: "asc" | "desc";
    offset?: number;
    limit?: number;
  } = {}): Promise<TxnPage> {
    const params = new URLSearchParams();
    if (opts.part) params.set("part", opts.part);
    params.set("sort", opts.sort ?? "score");
    params.set("order", opts.order ?? "desc");
    params.set("offset", String(opts.offset ?? 0));
    params.set("limit", String(opts.limit ?? 50));
    return this.request(`/transactions?${params.toString()}`);
  }

  transaction(id: string): Promise<TxnDetail> {
    return this.request(`/transactions/${encodeURIComponent(id)}`);
  }

  neighborhood(id: string, hops: number): Promise<Neighborhood> {
    return this.request(`/neighborhood/${encodeURIComponent(id)}?hops=${hops}`);
  }

  /** Kick off a mask-optimization job; explanations are fetched by polling. */
  requestExplanation(txnId: string, opts: { threshold?: number; epochs?: number } = {}):
    Promise<{ v: number; job_id: string; cached: boolean }> {
    return this.request("/explain", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        txn_id: txnId,
        // the server exports at threshold 0 so the client can filter live
        threshold: opts.threshold ?? 0.0,
        ...(opts.epochs !== undefined ? { epochs: opts.epochs } : {}),
      }),
    });
  }

  explanationStatus(jobId: string): Promise<ExplainJobStatus> {
    return this.request(`/explain/${encodeURIComponent(jobId)}`);
  }

  timeline(entityId: string): Promise<Timeline> {
    return this.request(`/timeline/${encodeURIComponent(entityId)}`);
  }

  project(ids: string[]): Promise<Projection> {
    return this.request("/project", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ ids }),
    });
  }
}
