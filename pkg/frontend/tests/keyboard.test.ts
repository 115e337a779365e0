import { describe, expect, it } from "vitest";

import { mapKey } from "../src/keyboard.js";

describe("keyboard mapping", () => {
  it("digits 0-3 choose the grade", () => {
    expect(mapKey("0")).toEqual({ kind: "choose", score: 0 });
    expect(mapKey("1")).toEqual({ kind: "choose", score: 1 });
    expect(mapKey("2")).toEqual({ kind: "choose", score: 2 });
    expect(mapKey("3")).toEqual({ kind: "choose", score: 3 });
  });

  it("Enter submits", () => {
    expect(mapKey("Enter")).toEqual({ kind: "submit" });
  });

  it("everything else is ignored", () => {
    for (const key of ["4", "9", "a", " ", "Escape", "ArrowDown"]) {
      expect(mapKey(key)).toBeNull();
    }
  });
});
