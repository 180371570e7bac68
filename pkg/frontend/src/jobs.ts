import type { JobPayload, StudioClient } from "./api.js";

export class JobFailedError extends Error {
  constructor(readonly job: JobPayload) {
    super(`${job.stage} job failed: ${job.error?.message ?? "unknown error"}`);
  }
}

const sleep = (ms: number) => new Promise<void>((resolve) => setTimeout(resolve, ms));

export interface PollOptions {
  intervalMs?: number;
  timeoutMs?: number;
  onUpdate?: (job: JobPayload) => void;
}

/** Poll a stage job until it reaches done (returned) or failed (thrown). */
export async function pollJob(
  client: StudioClient,
  jobId: string,
  options: PollOptions = {},
): Promise<JobPayload> {
  const interval = options.intervalMs ?? 250;
  const deadline = Date.now() + (options.timeoutMs ?? 300_000);
  for (;;) {
    const job = await client.getJob(jobId);
    options.onUpdate?.(job);
    if (job.status === "done") return job;
    if (job.status === "failed") throw new JobFailedError(job);
    if (Date.now() > deadline) {
      throw new Error(`job ${jobId} still ${job.status} after timeout`);
    }
    await sleep(interval);
  }
}
