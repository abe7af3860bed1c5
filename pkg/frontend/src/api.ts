// Thin typed client for the four session endpoints.

import type { Polyline, Prediction, Stage } from "./state.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`${status}: ${detail}`);
  }
}

export interface SessionInfo {
  session_id: string;
  width: number;
  height: number;
}

export interface MarkersResponse {
  stage: Stage;
  mask_png: string;
  masked_image_png: string;
  next_stage: Stage;
}

async function parse<T>(r: Response): Promise<T> {
  if (!r.ok) {
    let detail = r.statusText;
    try {
      detail = (await r.json()).detail ?? detail;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(r.status, detail);
  }
  return r.json() as Promise<T>;
}

export async function createSession(file: File): Promise<SessionInfo> {
  const form = new FormData();
  form.append("image", file);
  return parse(await fetch("/api/sessions", { method: "POST", body: form }));
}

export function regionsUrl(sessionId: string): string {
  return `/api/sessions/${sessionId}/regions`;
}

export async function submitMarkers(
  sessionId: string,
  stage: Stage,
  objectStrokes: Polyline[],
  backgroundStrokes: Polyline[],
  advance: boolean,
): Promise<MarkersResponse> {
  return parse(
    await fetch(`/api/sessions/${sessionId}/markers`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({
        stage,
        object_strokes: objectStrokes,
        background_strokes: backgroundStrokes,
        advance,
      }),
    }),
  );
}

export async function predict(
  sessionId: string,
  model: string,
): Promise<Prediction> {
  return parse(
    await fetch(`/api/sessions/${sessionId}/predict`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ model }),
    }),
  );
}
