import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../api.js";
import { FixtureService, fixtures } from "./fixture_service.js";

describe("api client", () => {
  it("fetches scored transaction pages with query params", async () => {
    const svc = new FixtureService();
    const api = new ApiClient("", svc.fetch);
    const page = await api.transactions({ part: "test", sort: "score", limit: 15 });
    expect(page.items.length).toBeGreaterThan(0);
    expect(page).toEqual(fixtures.transactions_page);
    expect(svc.requests[0].path).toContain("part=test");
    expect(svc.requests[0].path).toContain("sort=score");
  });

  it("requests explanations with threshold zero by default for live filtering", async () => {
    const svc = new FixtureService();
    const api = new ApiClient("", svc.fetch);
    await api.requestExplanation("t000001");
    const post = svc.explainPosts()[0];
    expect(post.body).toMatchObject({ txn_id: "t000001", threshold: 0 });
  });

  it("maps error payloads to ApiError", async () => {
    const api = new ApiClient("", async () =>
      new Response(JSON.stringify({ v: 1, error: "unknown transaction" }),
        { status: 404 }));
    await expect(api.transaction("zzz")).rejects.toThrowError(ApiError);
    await expect(api.transaction("zzz")).rejects.toMatchObject({ status: 404 });
  });
});
