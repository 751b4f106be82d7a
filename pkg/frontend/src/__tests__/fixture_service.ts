/** Fake fetch backed by frozen payloads captured from the real service. */

import fixtures from "./fixtures.json";

export interface RecordedRequest {
  method: string;
  path: string;
  body?: unknown;
}

export class FixtureService {
  requests: RecordedRequest[] = [];
  /** every GET /explain/{job} returns "running" this many times first */
  pendingPolls = 1;
  private pollCount = new Map<string, number>();

  readonly fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    const url = new URL(input, "http://service");
    const method = (init?.method ?? "GET").toUpperCase();
    const body = init?.body ? JSON.parse(init.body as string) : undefined;
    this.requests.push({ method, path: url.pathname + url.search, body });
    const payload = this.route(method, url, body);
    if (payload === undefined) {
      return json(404, { v: 1, error: `no fixture for ${method} ${url.pathname}` });
    }
    return json(200, payload);
  };

  explainPosts(): RecordedRequest[] {
    return this.requests.filter((r) => r.method === "POST" && r.path === "/explain");
  }

  mutatingRequests(): RecordedRequest[] {
    return this.requests.filter((r) => r.method !== "GET");
  }

  private route(method: string, url: URL, body?: unknown): unknown {
    const path = url.pathname;
    if (method === "GET" && path === "/health") {
      return { v: 1, status: "ok" };
    }
    if (method === "GET" && path === "/transactions") {
      const page = structuredClone(fixtures.transactions_page);
      if (url.searchParams.get("order") === "asc") {
        page.items = [...page.items].reverse();
      }
      return page;
    }
    if (method === "GET" && path.startsWith("/transactions/")) {
      return fixtures.transaction_detail;
    }
    if (method === "POST" && path === "/explain") {
      const txn = (body as { txn_id: string }).txn_id;
      if (txn === fixtures.pivot_txn) return fixtures.pivot_job_submit;
      return fixtures.explain_job_submit;
    }
    if (method === "GET" && path.startsWith("/explain/")) {
      const jobId = path.split("/").pop()!;
      const polls = (this.pollCount.get(jobId) ?? 0) + 1;
      this.pollCount.set(jobId, polls);
      if (polls <= this.pendingPolls) {
        return { v: 1, job_id: jobId, txn_id: "", status: "running" };
      }
      if (jobId === (fixtures.pivot_job_submit as { job_id: string }).job_id) {
        return fixtures.pivot_job_done;
      }
      return fixtures.explain_job_done;
    }
    if (method === "GET" && path.startsWith("/timeline/")) {
      return fixtures.timeline;
    }
    if (method === "POST" && path === "/project") {
      return fixtures.projection;
    }
    return undefined;
  }
}

function json(status: number, payload: unknown): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { "content-type": "application/json" },
  });
}

export { fixtures };
