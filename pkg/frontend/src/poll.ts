/** Poll an explanation job until it leaves the running state, with backoff. */

import { ApiClient, ExplainJobStatus } from "./api.js";

export interface PollOptions {
  initialDelayMs?: number;
  maxDelayMs?: number;
  timeoutMs?: number;
  sleep?: (ms: number) => Promise<void>;
}

const defaultSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export async function pollExplanation(
  api: ApiClient,
  jobId: string,
  opts: PollOptions = {},
): Promise<ExplainJobStatus> {
  const sleep = opts.sleep ?? defaultSleep;
  const timeout = opts.timeoutMs ?? 60_000;
  let delay = opts.initialDelayMs ?? 150;
  const maxDelay = opts.maxDelayMs ?? 2_000;
  const start = Date.now();
  for (;;) {
    const status = await api.explanationStatus(jobId);
    if (status.status !== "running") {
      return status;
    }
    if (Date.now() - start > timeout) {
      throw new Error(`explanation job ${jobId} timed out`);
    }
    await sleep(delay);
    delay = Math.min(delay * 2, maxDelay);
  }
}
