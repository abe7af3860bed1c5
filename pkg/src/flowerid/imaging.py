"""Image I/O, color conversion, binary morphology, and region geometry.

Images are (H, W, 3) uint8 numpy arrays in RGB order; masks are (H, W) bool
arrays (True = object).  Contours are (N, 2) int arrays of (x, y) boundary
coordinates forming a closed loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from . import kernels
from .errors import DecodeError, DegenerateShape, DimensionMismatch, EmptyResult, IoError

DEFAULT_MAX_W = 600
DEFAULT_MAX_H = 500


@dataclass(frozen=True)
class Centroid:
    gx: float
    gy: float


@dataclass(frozen=True)
class RegionGeometry:
    area: int
    perimeter: float


def load_image(path) -> np.ndarray:
    """Decode a PNG/JPEG to an RGB array; alpha is composited over black."""
    try:
        with open(path, "rb") as fh:
            try:
                img = Image.open(fh)
                img.load()
            except UnidentifiedImageError as exc:
                raise DecodeError(f"cannot decode {path}: {exc}") from exc
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    if img.mode in ("RGBA", "LA", "PA"):
        rgba = np.asarray(img.convert("RGBA"), dtype=np.float64)
        a = rgba[..., 3:4] / 255.0
        rgb = (rgba[..., :3] * a).round().astype(np.uint8)
        return rgb
    return np.asarray(img.convert("RGB"))


def save_image(img: np.ndarray, path) -> None:
    Image.fromarray(img, mode="RGB").save(path)


def save_mask(mask: np.ndarray, path) -> None:
    """Masks serialize as 8-bit grayscale PNG: 0 background, 255 object."""
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L").save(path)


def load_mask(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            arr = np.asarray(img.convert("L"))
    except FileNotFoundError as exc:
        raise IoError(str(exc)) from exc
    except UnidentifiedImageError as exc:
        raise DecodeError(str(exc)) from exc
    return arr >= 128


def resize_to_limit(img: np.ndarray, max_w: int = DEFAULT_MAX_W, max_h: int = DEFAULT_MAX_H) -> np.ndarray:
    """Shrink to fit within max_w x max_h, preserving aspect ratio.

    Images already inside the limit are returned unchanged; otherwise both
    axes are scaled by min(max_w/w, max_h/h) with bilinear interpolation and
    floored (min 1 px), so the result always fits and the op is idempotent.
    """
    h, w = img.shape[:2]
    if w <= max_w and h <= max_h:
        return img
    f = min(max_w / w, max_h / h)
    nw = max(1, int(w * f))
    nh = max(1, int(h * f))
    out = Image.fromarray(img, mode="RGB").resize((nw, nh), Image.BILINEAR)
    return np.asarray(out)


def rgb_to_hs(r: int, g: int, b: int) -> tuple[float, float]:
    """Hexcone RGB -> (hue degrees in [0, 360), saturation in [0, 1]).

    The value channel is deliberately dropped; pure black maps to (0, 0).
    """
    mx = max(r, g, b)
    if mx == 0:
        return 0.0, 0.0
    mn = min(r, g, b)
    d = mx - mn
    s = d / mx
    if d == 0:
        return 0.0, s
    if mx == r:
        h = 60.0 * ((g - b) / d)
    elif mx == g:
        h = 60.0 * (2.0 + (b - r) / d)
    else:
        h = 60.0 * (4.0 + (r - g) / d)
    return h % 360.0, s


def rgb_to_hs_image(img: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rgb_to_hs over an (H, W, 3) image; returns (H°, S) floats."""
    rgb = img.astype(np.float64)
    mx = rgb.max(axis=-1)
    mn = rgb.min(axis=-1)
    d = mx - mn
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(mx > 0, d / np.where(mx > 0, mx, 1), 0.0)
        dd = np.where(d > 0, d, 1.0)
        r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
        h = np.where(
            mx == r,
            60.0 * (g - b) / dd,
            np.where(mx == g, 60.0 * (2.0 + (b - r) / dd), 60.0 * (4.0 + (r - g) / dd)),
        )
    h = np.where(d > 0, h % 360.0, 0.0)
    return h, s


def disk_element(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return (xx * xx + yy * yy) <= r * r


def morph_cleanup(mask: np.ndarray, radius: int = 2) -> np.ndarray:
    """Opening with a disk element, hole filling, largest 8-connected component.

    Erosion treats pixels outside the frame as object so that shapes touching
    the border are not eaten away.  Hole filling uses 4-connectivity for the
    background (dual to 8-connected objects).
    """
    mask = mask.astype(bool)
    if radius > 0:
        se = disk_element(radius)
        opened = ndimage.binary_erosion(mask, structure=se, border_value=1)
        if not opened.any():
            raise EmptyResult("erosion removed all object pixels")
        opened = ndimage.binary_dilation(opened, structure=se, border_value=0)
    else:
        opened = mask
    if not opened.any():
        raise EmptyResult("no object pixels")
    filled = ndimage.binary_fill_holes(opened)  # default structure = 4-connectivity
    labels, n = ndimage.label(filled, structure=np.ones((3, 3), dtype=bool))
    if n <= 1:
        return filled
    sizes = ndimage.sum_labels(np.ones_like(labels), labels, index=np.arange(1, n + 1))
    keep = int(np.argmax(sizes)) + 1  # ties: lowest label (first occurrence)
    return labels == keep


def trace_contour(mask: np.ndarray) -> np.ndarray:
    """Closed outer boundary of a single-component mask via Moore tracing.

    Starts at the topmost-leftmost object pixel; consecutive points are
    8-adjacent and the last point is adjacent to the first.
    """
    pts = kernels.trace_boundary(np.ascontiguousarray(mask, dtype=np.uint8))
    if len(pts) == 0:
        raise DegenerateShape("empty mask")
    distinct = len(np.unique(pts, axis=0))
    if distinct < 4:
        raise DegenerateShape(f"component has only {distinct} boundary pixels")
    return pts


def centroid_of(mask: np.ndarray) -> Centroid:
    """Mean of object-pixel coordinates."""
    ys, xs = np.nonzero(mask)
    if len(xs) == 0:
        raise EmptyResult("empty mask")
    return Centroid(float(xs.mean()), float(ys.mean()))


def region_geometry(mask: np.ndarray, contour: np.ndarray) -> RegionGeometry:
    """Area = object pixel count; perimeter = chain-code step lengths.

    Steps along the closed contour walk contribute 1 (axis-aligned) or
    sqrt(2) (diagonal), including the closing step back to the start.
    """
    area = int(np.count_nonzero(mask))
    steps = np.abs(np.diff(np.vstack([contour, contour[:1]]), axis=0))
    diag = np.all(steps == 1, axis=1)
    perim = float(np.sum(np.where(diag, np.sqrt(2.0), steps.sum(axis=1))))
    return RegionGeometry(area, perim)
