// Session state machine: exactly three phases (loading, judging, done).
// The reducer is pure; the only thing kept across a failed submission is
// the unsent draft, so no judgment can be lost to a flaky network.

import type { Progress, Score, TaskView } from "./api.js";

export type Phase = "loading" | "judging" | "done";

export interface Draft {
  taskId: string;
  score: Score;
}

export interface SessionState {
  phase: Phase;
  task: TaskView | null;
  selected: Score | null;
  submitting: boolean;
  error: string | null;
  draft: Draft | null;
  progress: Progress | null;
}

export type Action =
  | { kind: "task_loaded"; task: TaskView }
  | { kind: "queue_done"; progress: Progress }
  | { kind: "fetch_failed"; message: string }
  | { kind: "select_score"; score: Score }
  | { kind: "submit_started" }
  | { kind: "submit_succeeded" }
  | { kind: "submit_failed"; message: string }
  | { kind: "retry" };

export const initialState: SessionState = {
  phase: "loading",
  task: null,
  selected: null,
  submitting: false,
  error: null,
  draft: null,
  progress: null,
};

export function reduce(state: SessionState, action: Action): SessionState {
  switch (action.kind) {
    case "task_loaded":
      return {
        ...state,
        phase: "judging",
        task: action.task,
        selected: null,
        submitting: false,
        error: null,
        draft: null,
      };
    case "queue_done":
      return {
        ...state,
        phase: "done",
        task: null,
        selected: null,
        submitting: false,
        error: null,
        draft: null,
        progress: action.progress,
      };
    case "fetch_failed":
      return { ...state, phase: "loading", error: action.message };
    case "select_score":
      if (state.phase !== "judging" || state.submitting) {
        return state;
      }
      return { ...state, selected: action.score };
    case "submit_started":
      if (state.phase !== "judging" || state.selected === null || state.task === null) {
        return state;
      }
      return {
        ...state,
        submitting: true,
        error: null,
        draft: { taskId: state.task.taskId, score: state.selected },
      };
    case "submit_succeeded":
      return { ...state, phase: "loading", submitting: false, draft: null, error: null };
    case "submit_failed":
      // keep the draft: retry must resubmit the same judgment
      return { ...state, submitting: false, error: action.message };
    case "retry":
      return { ...state, error: null };
  }
}

export function canSubmit(state: SessionState): boolean {
  return state.phase === "judging" && state.selected !== null && !state.submitting;
}
