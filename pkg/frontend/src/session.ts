// Session controller: drives the fetch -> judge -> submit -> next loop with
// a single in-flight request, waiting for every acknowledgement before
// advancing so no judgment is ever lost.

import { ApiClient, ApiError, type Score } from "./api.js";
import { canSubmit, initialState, reduce, type Action, type SessionState } from "./state.js";

export class AnnotationSession {
  state: SessionState = initialState;
  private busy = false;

  constructor(
    private readonly api: ApiClient,
    private readonly annotator: string,
    private readonly onChange: (state: SessionState) => void,
  ) {}

  private dispatch(action: Action): void {
    this.state = reduce(this.state, action);
    this.onChange(this.state);
  }

  async start(): Promise<void> {
    await this.fetchNext();
  }

  private async fetchNext(): Promise<void> {
    if (this.busy) {
      return;
    }
    this.busy = true;
    try {
      const task = await this.api.fetchNextTask(this.annotator);
      if (task === null) {
        const progress = await this.api.fetchProgress(this.annotator);
        this.dispatch({ kind: "queue_done", progress });
      } else {
        this.dispatch({ kind: "task_loaded", task });
      }
    } catch (err) {
      this.dispatch({ kind: "fetch_failed", message: messageOf(err) });
    } finally {
      this.busy = false;
    }
  }

  choose(score: Score): void {
    this.dispatch({ kind: "select_score", score });
  }

  async submit(): Promise<void> {
    if (!canSubmit(this.state) || this.busy) {
      return;
    }
    this.dispatch({ kind: "submit_started" });
    const draft = this.state.draft;
    if (!draft) {
      return;
    }
    this.busy = true;
    try {
      await this.api.submitJudgment(draft.taskId, this.annotator, draft.score);
      this.dispatch({ kind: "submit_succeeded" });
    } catch (err) {
      this.dispatch({ kind: "submit_failed", message: messageOf(err) });
      return;
    } finally {
      this.busy = false;
    }
    await this.fetchNext();
  }

  /** Resubmit a kept draft, or refetch after a failed load. */
  async retry(): Promise<void> {
    this.dispatch({ kind: "retry" });
    const draft = this.state.draft;
    if (this.state.phase === "judging" && draft) {
      this.busy = true;
      try {
        await this.api.submitJudgment(draft.taskId, this.annotator, draft.score);
        this.dispatch({ kind: "submit_succeeded" });
      } catch (err) {
        this.dispatch({ kind: "submit_failed", message: messageOf(err) });
        return;
      } finally {
        this.busy = false;
      }
      await this.fetchNext();
    } else {
      await this.fetchNext();
    }
  }
}

function messageOf(err: unknown): string {
  if (err instanceof ApiError) {
    return err.message;
  }
  return String(err);
}
