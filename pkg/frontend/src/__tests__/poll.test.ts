import { describe, expect, it } from "vitest";

import { ApiClient } from "../api.js";
import { pollExplanation } from "../poll.js";
import { FixtureService, fixtures } from "./fixture_service.js";

const instantSleep = async () => {};

describe("job polling", () => {
  it("polls until the job leaves the running state", async () => {
    const svc = new FixtureService();
    svc.pendingPolls = 3;
    const api = new ApiClient("", svc.fetch);
    const jobId = (fixtures.explain_job_submit as { job_id: string }).job_id;
    const out = await pollExplanation(api, jobId, { sleep: instantSleep });
    expect(out.status).toBe("done");
    const polls = svc.requests.filter((r) => r.path === `/explain/${jobId}`);
    expect(polls.length).toBe(4); // 3 running + 1 done
  });

  it("backs off between polls", async () => {
    const svc = new FixtureService();
    svc.pendingPolls = 3;
    const api = new ApiClient("", svc.fetch);
    const delays: number[] = [];
    const jobId = (fixtures.explain_job_submit as { job_id: string }).job_id;
    await pollExplanation(api, jobId, {
      sleep: async (ms) => {
        delays.push(ms);
      },
      initialDelayMs: 100,
    });
    expect(delays).toEqual([100, 200, 400]);
  });

  it("times out on jobs that never finish", async () => {
    const api = new ApiClient("", async () =>
      new Response(JSON.stringify({ v: 1, job_id: "x", txn_id: "t", status: "running" }),
        { status: 200 }));
    await expect(
      pollExplanation(api, "x", { sleep: instantSleep, timeoutMs: 0 }),
    ).rejects.toThrow(/timed out/);
  });
});
