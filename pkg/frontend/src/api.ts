/**
 * Typed client for the run service HTTP API.
 *
 * Step events arrive over server-sent events; they are read with fetch and a
 * streaming body parser rather than EventSource so the same code runs in the
 * browser and under Node during tests.
 */

export interface PlanStep {
  index: number;
  kind: string;
  final_goal: string;
  step_action: string;
  target_entity: string | null;
}

export interface Plan {
  original_prompt: string;
  planner_model: string;
  created_at: string;
  steps: PlanStep[];
}

export interface StepRecord {
  index: number;
  prompt_used: PlanStep;
  status: "pending" | "succeeded" | "failed" | "superseded";
  artifact_id: string | null;
  parent_artifact_id: string | null;
  started_at: string;
  finished_at: string | null;
  error: string | null;
}

export interface Intervention {
  kind: "edit_step" | "insert_step" | "delete_step" | "rerun_from";
  at_index: number;
  payload: PlanStep | null;
  author: string;
  applied_at: string;
}

export interface Run {
  run_id: string;
  plan: Plan;
  original_plan: Plan;
  backend_profile: string;
  status: "running" | "paused" | "completed" | "failed";
  steps: StepRecord[];
  interventions: Intervention[];
  artifacts: Record<string, { id: string; media_kind: string }>;
  created_at: string;
  step_mode: boolean;
}

export interface RunSummary {
  run_id: string;
  status: string;
  created_at: string;
  original_prompt: string;
  step_count: number;
}

export interface StepEvent {
  run_id: string;
  step_index: number;
  status: string;
  artifact_id: string | null;
  timestamp: string;
}

export interface SceneEntity {
  id: string;
  class: string;
  position: string;
  color: string | null;
  shape: string | null;
  texture: string | null;
  locked: boolean;
  placeholder: boolean;
  interactions: { verb: string; target_entity_id: string | null }[];
}

export interface SceneDocument {
  entities: SceneEntity[];
  background: string | null;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
    public detail: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function raiseForStatus(resp: Response): Promise<void> {
  if (resp.ok) return;
  let code = "unknown";
  let message = resp.statusText;
  let detail: unknown = null;
  try {
    const body = await resp.json();
    code = body.code ?? code;
    message = body.message ?? message;
    detail = body.detail ?? null;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ApiError(resp.status, code, message, detail);
}

export class MonitorClient {
  constructor(
    private baseUrl: string,
    private fetchImpl: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, init);
    await raiseForStatus(resp);
    return (await resp.json()) as T;
  }

  private post<T>(path: string, body?: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  }

  health(): Promise<{ status: string }> {
    return this.request("/healthz");
  }

  createRun(body: {
    prompt?: string;
    plan?: Plan;
    profile?: string;
    step_mode?: boolean;
  }): Promise<Run> {
    return this.post("/runs", body);
  }

  getRun(runId: string): Promise<Run> {
    return this.request(`/runs/${runId}`);
  }

  listRuns(status?: string): Promise<RunSummary[]> {
    const query = status ? `?status=${encodeURIComponent(status)}` : "";
    return this.request(`/runs${query}`);
  }

  pause(runId: string): Promise<Run> {
    return this.post(`/runs/${runId}/pause`);
  }

  resume(runId: string): Promise<Run> {
    return this.post(`/runs/${runId}/resume`);
  }

  intervene(
    runId: string,
    body: { kind: string; at_index: number; payload?: PlanStep },
  ): Promise<Run> {
    return this.post(`/runs/${runId}/interventions`, body);
  }

  evalReadability(runId: string): Promise<Record<string, unknown>> {
    return this.post(`/runs/${runId}/eval/readability`);
  }

  evalCausal(
    runId: string,
    body: { step_index: number; original_value: string; perturbed_value: string },
  ): Promise<Record<string, unknown>> {
    return this.post(`/runs/${runId}/eval/causal`, body);
  }

  async getScene(artifactId: string): Promise<SceneDocument> {
    return this.request(`/artifacts/${artifactId}`);
  }

  artifactPngUrl(artifactId: string): string {
    return `${this.baseUrl}/artifacts/${artifactId}.png`;
  }

  /**
   * Stream step events. Replays committed steps first, then tails live ones
   * while `follow` is set. Delivery is at-least-once; dedup by step index is
   * the timeline reducer's job.
   */
  async *events(
    runId: string,
    opts: { follow?: boolean; signal?: AbortSignal } = {},
  ): AsyncGenerator<StepEvent> {
    const follow = opts.follow ?? true;
    const resp = await this.fetchImpl(
      `${this.baseUrl}/runs/${runId}/events?follow=${follow}`,
      { signal: opts.signal },
    );
    await raiseForStatus(resp);
    if (!resp.body) throw new ApiError(0, "no_body", "event stream has no body");
    yield* parseSseStream(resp.body, opts.signal);
  }

  /** Collect events until the run stops producing them or `max` is reached. */
  async collectEvents(runId: string, max: number): Promise<StepEvent[]> {
    const controller = new AbortController();
    const out: StepEvent[] = [];
    try {
      for await (const event of this.events(runId, { signal: controller.signal })) {
        out.push(event);
        if (out.length >= max) break;
      }
    } finally {
      controller.abort();
    }
    return out;
  }
}

/** Parse an SSE byte stream into step events, skipping heartbeat comments. */
export async function* parseSseStream(
  body: ReadableStream<Uint8Array>,
  signal?: AbortSignal,
): AsyncGenerator<StepEvent> {
  const reader = body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  try {
    while (true) {
      if (signal?.aborted) return;
      const { done, value } = await reader.read();
      if (done) break;
      buffer += decoder.decode(value, { stream: true });
      let sep: number;
      while ((sep = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, sep);
        buffer = buffer.slice(sep + 2);
        const event = parseSseFrame(frame);
        if (event) yield event;
      }
    }
  } finally {
    reader.releaseLock();
  }
}

export function parseSseFrame(frame: string): StepEvent | null {
  let eventType = "";
  let data = "";
  for (const line of frame.split("\n")) {
    if (line.startsWith(":")) continue; // heartbeat comment
    if (line.startsWith("event: ")) eventType = line.slice(7).trim();
    else if (line.startsWith("data: ")) data = line.slice(6);
  }
  if (eventType !== "step" || !data) return null;
  return JSON.parse(data) as StepEvent;
}
