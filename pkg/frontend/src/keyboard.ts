// Keyboard mapping: digits 0-3 pick a grade, Enter submits. Everything the
// annotator needs is reachable without a mouse.

import type { Score } from "./api.js";

export type KeyAction = { kind: "choose"; score: Score } | { kind: "submit" } | null;

export function mapKey(key: string): KeyAction {
  if (key === "0" || key === "1" || key === "2" || key === "3") {
    return { kind: "choose", score: Number(key) as Score };
  }
  if (key === "Enter") {
    return { kind: "submit" };
  }
  return null;
}
