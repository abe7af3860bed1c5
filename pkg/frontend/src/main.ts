// Canvas marker editor driving the session API. All algorithmic work is
// server-side; this file only collects strokes and renders results.

import * as api from "./api.js";
import { canvasToImage, fitView, imageToCanvas, insideImage, View } from "./coords.js";
import {
  Action,
  canPredict,
  canSubmit,
  initialState,
  Mode,
  Point,
  reduce,
  UiState,
} from "./state.js";

const $ = <T extends HTMLElement>(id: string) =>
  document.getElementById(id) as T;

const canvas = $<HTMLCanvasElement>("canvas");
const ctx = canvas.getContext("2d")!;
const fileInput = $<HTMLInputElement>("file");
const modelInput = $<HTMLInputElement>("model");
const stageLabel = $<HTMLSpanElement>("stage");
const errorBanner = $<HTMLDivElement>("error");
const hint = $<HTMLSpanElement>("hint");
const panel = $<HTMLDivElement>("prediction");
const buttons = {
  object: $<HTMLButtonElement>("mode-object"),
  background: $<HTMLButtonElement>("mode-background"),
  undo: $<HTMLButtonElement>("undo"),
  submit: $<HTMLButtonElement>("submit"),
  accept: $<HTMLButtonElement>("accept"),
  predict: $<HTMLButtonElement>("predict"),
};

let state: UiState = initialState;
let view: View = { scale: 1, offsetX: 0, offsetY: 0 };
let baseImage: HTMLImageElement | null = null;
let maskImage: HTMLImageElement | null = null;
let maskSubmitted = false; // a preview exists for the current strokes

function dispatch(a: Action): void {
  state = reduce(state, a);
  if (a.kind === "mask-received") {
    maskImage = new Image();
    maskImage.onload = render;
    maskImage.src = "data:image/png;base64," + a.maskPng;
  }
  if (a.kind === "stage-advanced") {
    maskImage = null;
    maskSubmitted = false;
  }
  render();
}

function render(): void {
  ctx.fillStyle = "#202025";
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  if (baseImage) {
    view = fitView(
      state.imageWidth, state.imageHeight, canvas.width, canvas.height);
    ctx.drawImage(
      baseImage,
      view.offsetX, view.offsetY,
      state.imageWidth * view.scale, state.imageHeight * view.scale);
    if (maskImage) {
      ctx.globalAlpha = 0.5;
      ctx.drawImage(
        maskImage,
        view.offsetX, view.offsetY,
        state.imageWidth * view.scale, state.imageHeight * view.scale);
      ctx.globalAlpha = 1.0;
    }
    drawStrokes(state.objectStrokes, "#ff3b30");
    drawStrokes(state.backgroundStrokes, "#34c0ff");
    if (state.drawing) {
      drawStrokes([state.drawing],
                  state.mode === "object" ? "#ff3b30" : "#34c0ff");
    }
  }

  stageLabel.textContent = state.stage;
  buttons.object.classList.toggle("active", state.mode === "object");
  buttons.background.classList.toggle("active", state.mode === "background");
  buttons.undo.disabled = state.pending;
  buttons.submit.disabled = !canSubmit(state);
  buttons.accept.disabled = !canSubmit(state) || !maskSubmitted;
  buttons.predict.disabled = !canPredict(state);
  errorBanner.textContent = state.error ?? "";
  errorBanner.hidden = state.error === null;
  hint.textContent = canSubmit(state) || state.stage === "done"
    ? ""
    : "draw at least one object stroke and one background stroke";

  if (state.prediction) {
    const p = state.prediction;
    const peak = Math.max(1, ...p.votes.map((v) => v[1]));
    panel.innerHTML =
      `<h2>${p.species} <small>(${p.genus})</small></h2>` +
      p.votes
        .map(
          ([name, n]) =>
            `<div class="vote"><span>${name}</span>` +
            `<div class="bar" style="width:${(100 * n) / peak}%"></div>` +
            `<span>${n}</span></div>`,
        )
        .join("") +
      `<p>${p.seconds.toFixed(2)} s</p>`;
  } else {
    panel.innerHTML = "";
  }
}

function drawStrokes(lines: Point[][], color: string): void {
  ctx.strokeStyle = color;
  ctx.lineWidth = 3;
  ctx.lineCap = "round";
  for (const line of lines) {
    ctx.beginPath();
    for (let i = 0; i < line.length; i++) {
      const [x, y] = imageToCanvas(line[i], view);
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    }
    if (line.length === 1) {
      const [x, y] = imageToCanvas(line[0], view);
      ctx.lineTo(x + 0.1, y);
    }
    ctx.stroke();
  }
}

function pointerPoint(ev: PointerEvent): Point {
  const rect = canvas.getBoundingClientRect();
  return canvasToImage(
    [ev.clientX - rect.left, ev.clientY - rect.top], view);
}

canvas.addEventListener("pointerdown", (ev) => {
  const p = pointerPoint(ev);
  if (!insideImage(p, state.imageWidth, state.imageHeight)) return;
  canvas.setPointerCapture(ev.pointerId);
  dispatch({ kind: "stroke-begin", point: p });
});
canvas.addEventListener("pointermove", (ev) => {
  if (state.drawing === null) return;
  const p = pointerPoint(ev);
  if (insideImage(p, state.imageWidth, state.imageHeight)) {
    dispatch({ kind: "stroke-extend", point: p });
  }
});
canvas.addEventListener("pointerup", () => {
  maskSubmitted = false;
  dispatch({ kind: "stroke-end" });
});

function setMode(mode: Mode): void {
  dispatch({ kind: "set-mode", mode });
}
buttons.object.addEventListener("click", () => setMode("object"));
buttons.background.addEventListener("click", () => setMode("background"));
buttons.undo.addEventListener("click", () => {
  maskSubmitted = false;
  dispatch({ kind: "undo" });
});

fileInput.addEventListener("change", async () => {
  const file = fileInput.files?.[0];
  if (!file) return;
  dispatch({ kind: "request-started" });
  try {
    const info = await api.createSession(file);
    dispatch({
      kind: "session-opened",
      sessionId: info.session_id,
      width: info.width,
      height: info.height,
    });
    baseImage = new Image();
    baseImage.onload = render;
    baseImage.src = URL.createObjectURL(file);
    maskImage = null;
    maskSubmitted = false;
  } catch (e) {
    dispatch({ kind: "request-failed", message: String(e) });
  }
});

async function submit(advance: boolean): Promise<void> {
  if (!canSubmit(state) || state.stage === "done") return;
  const stage = state.stage;
  dispatch({ kind: "request-started" });
  try {
    const r = await api.submitMarkers(
      state.sessionId!, stage,
      state.objectStrokes, state.backgroundStrokes, advance);
    dispatch({ kind: "mask-received", maskPng: r.mask_png });
    maskSubmitted = true;
    if (advance) dispatch({ kind: "stage-advanced", next: r.next_stage });
  } catch (e) {
    dispatch({ kind: "request-failed", message: String(e) });
  }
}
buttons.submit.addEventListener("click", () => void submit(false));
buttons.accept.addEventListener("click", () => void submit(true));

buttons.predict.addEventListener("click", async () => {
  if (!canPredict(state)) return;
  dispatch({ kind: "request-started" });
  try {
    const p = await api.predict(state.sessionId!, modelInput.value || "demo");
    dispatch({ kind: "prediction-received", prediction: p });
  } catch (e) {
    dispatch({ kind: "request-failed", message: String(e) });
  }
});

render();
