import { describe, expect, it } from "vitest";

import {
  Action,
  canPredict,
  canSubmit,
  initialState,
  reduce,
  UiState,
} from "../src/state.js";

function run(actions: Action[], from: UiState = initialState): UiState {
  return actions.reduce(reduce, from);
}

const opened: Action = {
  kind: "session-opened",
  sessionId: "s1",
  width: 160,
  height: 160,
};

function drag(points: [number, number][]): Action[] {
  const [first, ...rest] = points;
  return [
    { kind: "stroke-begin", point: first },
    ...rest.map((p): Action => ({ kind: "stroke-extend", point: p })),
    { kind: "stroke-end" },
  ];
}

describe("stroke buffers", () => {
  it("one drag of 5 points lands one 5-point polyline in the object buffer", () => {
    const s = run([
      opened,
      ...drag([[1, 1], [2, 2], [3, 3], [4, 4], [5, 5]]),
    ]);
    expect(s.objectStrokes).toHaveLength(1);
    expect(s.objectStrokes[0]).toHaveLength(5);
    expect(s.backgroundStrokes).toHaveLength(0);
  });

  it("undo removes the most recent stroke of the active buffer", () => {
    const s = run([
      opened,
      ...drag([[1, 1], [2, 2]]),
      ...drag([[5, 5], [6, 6]]),
      { kind: "undo" },
    ]);
    expect(s.objectStrokes).toHaveLength(1);
    expect(s.objectStrokes[0][0]).toEqual([1, 1]);
  });

  it("mode toggle routes subsequent strokes to the other buffer", () => {
    const s = run([
      opened,
      ...drag([[1, 1], [2, 2]]),
      { kind: "set-mode", mode: "background" },
      ...drag([[9, 9], [8, 8]]),
    ]);
    expect(s.objectStrokes).toHaveLength(1);
    expect(s.backgroundStrokes).toHaveLength(1);
  });

  it("drawing is a no-op before a session is open", () => {
    const s = run(drag([[1, 1], [2, 2]]));
    expect(s.objectStrokes).toHaveLength(0);
  });
});

describe("stage gating", () => {
  const bothBuffers = [
    opened,
    ...drag([[10, 10], [20, 20]]),
    { kind: "set-mode", mode: "background" } as Action,
    ...drag([[1, 1], [2, 1]]),
  ];

  it("submit requires both buffers nonempty", () => {
    const onlyObject = run([opened, ...drag([[10, 10], [20, 20]])]);
    expect(canSubmit(onlyObject)).toBe(false);
    expect(canSubmit(run(bothBuffers))).toBe(true);
  });

  it("predict is gated until the stage reaches done", () => {
    const flower = run(bothBuffers);
    expect(canPredict(flower)).toBe(false);
    const lip = reduce(flower, { kind: "stage-advanced", next: "lip" });
    expect(canPredict(lip)).toBe(false);
    const done = reduce(lip, { kind: "stage-advanced", next: "done" });
    expect(canPredict(done)).toBe(true);
    expect(canSubmit(done)).toBe(false);
  });

  it("stroke buffers and overlay clear on stage advance", () => {
    const s = run([
      ...bothBuffers,
      { kind: "mask-received", maskPng: "abc" },
      { kind: "stage-advanced", next: "lip" },
    ]);
    expect(s.stage).toBe("lip");
    expect(s.objectStrokes).toHaveLength(0);
    expect(s.backgroundStrokes).toHaveLength(0);
    expect(s.maskPng).toBeNull();
  });

  it("no strokes start while a request is pending", () => {
    const s = run([
      ...bothBuffers,
      { kind: "request-started" },
      ...drag([[30, 30], [31, 31]]),
    ]);
    expect(s.objectStrokes).toHaveLength(1);
    expect(canSubmit(s)).toBe(false);
  });

  it("a failed request surfaces the message and preserves buffers", () => {
    const s = run([
      ...bothBuffers,
      { kind: "request-started" },
      { kind: "request-failed", message: "422: strokes outside image" },
    ]);
    expect(s.error).toContain("422");
    expect(s.objectStrokes).toHaveLength(1);
    expect(canSubmit(s)).toBe(true);
  });
});
