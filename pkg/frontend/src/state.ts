// Pure UI state machine for the marker editor. No DOM access here so the
// reducer can be unit tested; main.ts renders from the returned state.

export type Stage = "flower" | "lip" | "done";
export type Mode = "object" | "background";
export type Point = [number, number];
export type Polyline = Point[];

export interface Prediction {
  species: string;
  genus: string;
  votes: [string, number][];
  seconds: number;
}

export interface UiState {
  sessionId: string | null;
  imageWidth: number;
  imageHeight: number;
  stage: Stage;
  mode: Mode;
  objectStrokes: Polyline[];
  backgroundStrokes: Polyline[];
  drawing: Polyline | null;
  maskPng: string | null;
  pending: boolean;
  error: string | null;
  prediction: Prediction | null;
}

export const initialState: UiState = {
  sessionId: null,
  imageWidth: 0,
  imageHeight: 0,
  stage: "flower",
  mode: "object",
  objectStrokes: [],
  backgroundStrokes: [],
  drawing: null,
  maskPng: null,
  pending: false,
  error: null,
  prediction: null,
};

export type Action =
  | { kind: "session-opened"; sessionId: string; width: number; height: number }
  | { kind: "set-mode"; mode: Mode }
  | { kind: "stroke-begin"; point: Point }
  | { kind: "stroke-extend"; point: Point }
  | { kind: "stroke-end" }
  | { kind: "undo" }
  | { kind: "request-started" }
  | { kind: "request-failed"; message: string }
  | { kind: "mask-received"; maskPng: string }
  | { kind: "stage-advanced"; next: Stage }
  | { kind: "prediction-received"; prediction: Prediction };

export function reduce(s: UiState, a: Action): UiState {
  switch (a.kind) {
    case "session-opened":
      return {
        ...initialState,
        sessionId: a.sessionId,
        imageWidth: a.width,
        imageHeight: a.height,
      };
    case "set-mode":
      return { ...s, mode: a.mode, drawing: null };
    case "stroke-begin":
      if (s.sessionId === null || s.stage === "done" || s.pending) return s;
      return { ...s, drawing: [a.point] };
    case "stroke-extend":
      if (s.drawing === null) return s;
      return { ...s, drawing: [...s.drawing, a.point] };
    case "stroke-end": {
      if (s.drawing === null) return s;
      const done = s.drawing;
      const next = { ...s, drawing: null };
      if (s.mode === "object") {
        next.objectStrokes = [...s.objectStrokes, done];
      } else {
        next.backgroundStrokes = [...s.backgroundStrokes, done];
      }
      return next;
    }
    case "undo": {
      if (s.mode === "object") {
        return { ...s, objectStrokes: s.objectStrokes.slice(0, -1) };
      }
      return { ...s, backgroundStrokes: s.backgroundStrokes.slice(0, -1) };
    }
    case "request-started":
      return { ...s, pending: true, error: null };
    case "request-failed":
      return { ...s, pending: false, error: a.message };
    case "mask-received":
      return { ...s, pending: false, error: null, maskPng: a.maskPng };
    case "stage-advanced":
      // strokes belong to the finished stage; the next one starts clean
      return {
        ...s,
        pending: false,
        error: null,
        stage: a.next,
        objectStrokes: [],
        backgroundStrokes: [],
        drawing: null,
        maskPng: null,
      };
    case "prediction-received":
      return { ...s, pending: false, error: null, prediction: a.prediction };
  }
}

// Gates mirror the server's 409/422 rules so the UI never sends a request
// the server would reject for workflow reasons.
export function canSubmit(s: UiState): boolean {
  return (
    s.sessionId !== null &&
    s.stage !== "done" &&
    !s.pending &&
    s.objectStrokes.length > 0 &&
    s.backgroundStrokes.length > 0
  );
}

export function canPredict(s: UiState): boolean {
  return s.sessionId !== null && s.stage === "done" && !s.pending;
}
