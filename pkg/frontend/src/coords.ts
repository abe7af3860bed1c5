// Mapping between canvas pixels and original-image pixels. Strokes are
// always sent to the server in image space, whatever the display scale.

import type { Point } from "./state.js";

export interface View {
  scale: number;
  offsetX: number;
  offsetY: number;
}

/** Letterbox fit of an image into a canvas, centered. */
export function fitView(
  imgW: number,
  imgH: number,
  canvasW: number,
  canvasH: number,
): View {
  const scale = Math.min(canvasW / imgW, canvasH / imgH);
  return {
    scale,
    offsetX: (canvasW - imgW * scale) / 2,
    offsetY: (canvasH - imgH * scale) / 2,
  };
}

export function canvasToImage(p: Point, v: View): Point {
  return [(p[0] - v.offsetX) / v.scale, (p[1] - v.offsetY) / v.scale];
}

export function imageToCanvas(p: Point, v: View): Point {
  return [p[0] * v.scale + v.offsetX, p[1] * v.scale + v.offsetY];
}

export function insideImage(p: Point, imgW: number, imgH: number): boolean {
  return p[0] >= 0 && p[1] >= 0 && p[0] < imgW && p[1] < imgH;
}
