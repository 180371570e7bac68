/** Typed client for the studio's HTTP API. */

export interface ScoreReportPayload {
  prompt_used: string;
  initial_score: number;
  inpainted_score: number;
  delta: number;
  embedder_id: string;
}

export interface SessionPayload {
  session_id: string;
  state: string;
  seed: number;
  prompts: {
    initial_prompt: string;
    target_description: string;
    refined_prompt: string | null;
    suggested_prompt: string | null;
  };
  score_report: ScoreReportPayload | null;
  artifacts: {
    initial_image: string | null;
    mask: string | null;
    inpainted_image: string | null;
  };
  history: Array<{
    timestamp: string;
    from_state: string;
    to_state: string;
    actor: string;
  }>;
}

export interface JobPayload {
  job_id: string;
  session_id: string;
  stage: string;
  status: "pending" | "running" | "done" | "failed";
  error: { code: string; message: string } | null;
  result: {
    stage: string;
    state: string;
    artifact_refs: Record<string, string>;
    duration_ms: number;
    backend_id: string;
  } | null;
}

export interface SpecPayload {
  routes: Array<{ method: string; path: string }>;
  states: string[];
  transitions: Record<string, Record<string, string>>;
  enabled_stages: Record<string, string[]>;
  image_stages: string[];
}

export type MaskSeedPayload =
  | { kind: "point"; point: [number, number] }
  | { kind: "box"; box: [number, number, number, number] }
  | { kind: "strokes"; strokes: Array<{ points: Array<[number, number]>; radius: number }> };

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

type FetchLike = typeof fetch;

export class StudioClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let code = `HTTP${response.status}`;
      let message = response.statusText;
      try {
        const body = await response.json();
        if (body?.error) {
          code = body.error.code ?? code;
          message = body.error.message ?? message;
        } else if (body?.detail) {
          message = JSON.stringify(body.detail);
        }
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, code, message);
    }
    return (await response.json()) as T;
  }

  getSpec(): Promise<SpecPayload> {
    return this.request<SpecPayload>("/spec");
  }

  createSession(initialPrompt: string, targetDescription: string, seed?: number): Promise<SessionPayload> {
    return this.request<SessionPayload>("/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        initial_prompt: initialPrompt,
        target_description: targetDescription,
        ...(seed === undefined ? {} : { seed }),
      }),
    });
  }

  getSession(sessionId: string): Promise<SessionPayload> {
    return this.request<SessionPayload>(`/sessions/${sessionId}`);
  }

  runGenerate(sessionId: string): Promise<JobPayload> {
    return this.request<JobPayload>(`/sessions/${sessionId}/generate`, { method: "POST" });
  }

  runMaskSeed(sessionId: string, seed: MaskSeedPayload): Promise<JobPayload> {
    return this.request<JobPayload>(`/sessions/${sessionId}/mask`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ seed }),
    });
  }

  /** Upload a painted mask as a single-channel 0/255 PNG. */
  uploadMask(sessionId: string, png: Uint8Array): Promise<JobPayload> {
    const form = new FormData();
    const buffer = png.buffer.slice(png.byteOffset, png.byteOffset + png.byteLength) as ArrayBuffer;
    form.append("mask", new Blob([buffer], { type: "image/png" }), "mask.png");
    return this.request<JobPayload>(`/sessions/${sessionId}/mask`, {
      method: "POST",
      body: form,
    });
  }

  runRefine(sessionId: string, userEdit?: string): Promise<JobPayload> {
    return this.request<JobPayload>(`/sessions/${sessionId}/refine`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(userEdit ? { user_edit: userEdit } : {}),
    });
  }

  runInpaint(sessionId: string): Promise<JobPayload> {
    return this.request<JobPayload>(`/sessions/${sessionId}/inpaint`, { method: "POST" });
  }

  runScore(sessionId: string): Promise<JobPayload> {
    return this.request<JobPayload>(`/sessions/${sessionId}/score`, { method: "POST" });
  }

  getJob(jobId: string): Promise<JobPayload> {
    return this.request<JobPayload>(`/jobs/${jobId}`);
  }

  imageUrl(sessionId: string, stage: "initial" | "mask" | "inpainted"): string {
    return `${this.baseUrl}/sessions/${sessionId}/images/${stage}`;
  }

  async fetchImageBytes(sessionId: string, stage: "initial" | "mask" | "inpainted"): Promise<Uint8Array> {
    const response = await this.fetchImpl(this.imageUrl(sessionId, stage));
    if (!response.ok) {
      throw new ApiError(response.status, `HTTP${response.status}`, `no ${stage} image`);
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}
