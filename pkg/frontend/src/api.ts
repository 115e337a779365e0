// Typed client for the annotation service JSON API. Same-origin by default;
// the service never sends automated scores, and nothing here would surface
// them anyway: payloads are narrowed to the fields the UI knows about.

export type Score = 0 | 1 | 2 | 3;

export interface TaskView {
  taskId: string;
  position: number;
  total: number;
  query: string;
  text: string;
  funcloc: string | null;
}

export interface Progress {
  judged: number;
  remaining: number;
  total: number;
  histogram: Record<string, number>;
}

export class ApiError extends Error {
  constructor(message: string, readonly status?: number) {
    super(message);
    this.name = "ApiError";
  }
}

/** Narrow a raw task payload to exactly the fields the UI renders. */
export function toTaskView(raw: Record<string, unknown>): TaskView {
  return {
    taskId: String(raw["task_id"]),
    position: Number(raw["position"]),
    total: Number(raw["total"]),
    query: String(raw["query"]),
    text: String(raw["text"]),
    funcloc: raw["funcloc"] == null ? null : String(raw["funcloc"]),
  };
}

async function getJson(url: string): Promise<Record<string, unknown>> {
  let response: Response;
  try {
    response = await fetch(url);
  } catch (err) {
    throw new ApiError(`network error: ${String(err)}`);
  }
  if (!response.ok) {
    throw new ApiError(`request failed (${response.status})`, response.status);
  }
  return (await response.json()) as Record<string, unknown>;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  /** Next unjudged task for this annotator, or null when the queue is done. */
  async fetchNextTask(annotator: string): Promise<TaskView | null> {
    const raw = await getJson(
      `${this.baseUrl}/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
    if (raw["done"] === true) {
      return null;
    }
    return toTaskView(raw);
  }

  async submitJudgment(taskId: string, annotator: string, score: Score): Promise<void> {
    let response: Response;
    try {
      response = await fetch(`${this.baseUrl}/api/judgments`, {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify({ task_id: taskId, annotator_id: annotator, score }),
      });
    } catch (err) {
      throw new ApiError(`network error: ${String(err)}`);
    }
    if (!response.ok) {
      throw new ApiError(`judgment rejected (${response.status})`, response.status);
    }
  }

  async fetchProgress(annotator: string): Promise<Progress> {
    const raw = await getJson(
      `${this.baseUrl}/api/progress?annotator=${encodeURIComponent(annotator)}`,
    );
    return {
      judged: Number(raw["judged"]),
      remaining: Number(raw["remaining"]),
      total: Number(raw["total"]),
      histogram: (raw["histogram"] ?? {}) as Record<string, number>,
    };
  }

  async fetchRubric(): Promise<string> {
    const raw = await getJson(`${this.baseUrl}/api/rubric`);
    return String(raw["rubric"] ?? "");
  }
}
