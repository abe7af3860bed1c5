"""Marker-driven maximal-similarity region merging.

The initial over-segmentation is a color-quantized flood fill (4-connected
components of 16-level-per-channel quantized color) with small regions
absorbed into their most similar neighbor.  User strokes seed object and
background regions; merging then alternates a background-expansion phase and
a mutual-maximal phase until fixpoint, and the surviving unlabeled regions
join the object.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from . import kernels
from .errors import DimensionMismatch, EmptyRegion, InvalidMarkers, NoObject
from .imaging import morph_cleanup

QUANT_STEP = 16  # 16 levels per channel -> 4096 histogram bins


@dataclass
class RegionMap:
    labels: np.ndarray  # (H, W) int32, region id per pixel
    region_count: int


@dataclass
class MarkerSet:
    """Object / background stroke pixels as boolean masks."""
    object_mask: np.ndarray
    background_mask: np.ndarray

    def validate(self) -> None:
        if self.object_mask.shape != self.background_mask.shape:
            raise DimensionMismatch("marker planes differ in shape")
        if np.any(self.object_mask & self.background_mask):
            raise InvalidMarkers("a pixel is marked both object and background")


def quantize_codes(img: np.ndarray) -> np.ndarray:
    """Per-pixel 12-bit color code: floor(c/16) per channel packed together."""
    q = (img // QUANT_STEP).astype(np.int32)
    return q[..., 0] * 256 + q[..., 1] * 16 + q[..., 2]


def _adjacency_pairs(labels: np.ndarray) -> np.ndarray:
    """Unique (a, b) pairs of 4-adjacent distinct region ids, a < b."""
    pairs = []
    h_a, h_b = labels[:, :-1].ravel(), labels[:, 1:].ravel()
    v_a, v_b = labels[:-1, :].ravel(), labels[1:, :].ravel()
    a = np.concatenate([h_a, v_a])
    b = np.concatenate([h_b, v_b])
    keep = a != b
    a, b = a[keep], b[keep]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    return np.unique(np.stack([lo, hi], axis=1), axis=0)


def _region_histograms(codes: np.ndarray, labels: np.ndarray, count: int) -> np.ndarray:
    """(count, 4096) raw color-code counts per region."""
    flat = labels.ravel().astype(np.int64) * 4096 + codes.ravel().astype(np.int64)
    counts = np.bincount(flat, minlength=count * 4096)
    return counts.reshape(count, 4096).astype(np.float64)


def bhattacharyya(a: np.ndarray, b: np.ndarray) -> float:
    """Similarity sum_k sqrt(a_k * b_k) between normalized histograms."""
    rho = float(np.sqrt(a * b).sum())
    return min(max(rho, 0.0), 1.0)


def _canonical_relabel(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel region ids in raster-scan first-occurrence order."""
    flat = labels.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = uniq[np.argsort(first)]
    remap = np.empty(int(labels.max()) + 1, dtype=np.int32)
    remap[order] = np.arange(len(order), dtype=np.int32)
    return remap[labels], len(order)


class _MergeState:
    """Union-find over regions with histogram counts, sizes and adjacency."""

    def __init__(self, codes: np.ndarray, labels: np.ndarray, count: int):
        self.parent = np.arange(count, dtype=np.int64)
        self.hist = _region_histograms(codes, labels, count)
        self.size = np.bincount(labels.ravel(), minlength=count).astype(np.int64)
        self.adj: list[set[int]] = [set() for _ in range(count)]
        for a, b in _adjacency_pairs(labels):
            self.adj[a].add(int(b))
            self.adj[b].add(int(a))
        self.alive = np.ones(count, dtype=bool)

    def find(self, r: int) -> int:
        while self.parent[r] != r:
            self.parent[r] = self.parent[self.parent[r]]
            r = self.parent[r]
        return int(r)

    def similarity(self, a: int, b: int) -> float:
        ha = self.hist[a] / self.size[a]
        hb = self.hist[b] / self.size[b]
        return bhattacharyya(ha, hb)

    def best_neighbor(self, r: int) -> int:
        """Maximal-similarity adjacent region; ties broken by lowest id."""
        best = -1
        best_sim = -1.0
        for q in sorted(self.adj[r]):
            s = self.similarity(r, q)
            if s > best_sim + 1e-15:
                best_sim = s
                best = q
        return best

    def merge(self, src: int, dst: int) -> None:
        """Absorb region src into dst (dst keeps its id and label state)."""
        self.parent[src] = dst
        self.hist[dst] += self.hist[src]
        self.size[dst] += self.size[src]
        self.adj[dst] |= self.adj[src]
        self.adj[dst].discard(dst)
        self.adj[dst].discard(src)
        for q in self.adj[src]:
            if q != dst:
                self.adj[q].discard(src)
                self.adj[q].add(dst)
        self.adj[src] = set()
        self.alive[src] = False


def oversegment(img: np.ndarray, min_region: int = 20) -> RegionMap:
    """Partition into contiguous same-quantized-color regions, absorbing
    regions smaller than min_region into their most similar neighbor."""
    codes = quantize_codes(img)
    labels, count = kernels.label_regions(np.ascontiguousarray(codes))
    labels = labels.astype(np.int32)
    if min_region > 1 and count > 1:
        state = _MergeState(codes, labels, count)
        while True:
            small = [
                r for r in range(count)
                if state.alive[r] and state.size[r] < min_region and state.adj[r]
            ]
            if not small:
                break
            # absorb the smallest first; ties by lowest id
            r = min(small, key=lambda t: (state.size[t], t))
            state.merge(r, state.best_neighbor(r))
        roots = np.array([state.find(r) for r in range(count)], dtype=np.int32)
        labels = roots[labels]
    labels, count = _canonical_relabel(labels)
    return RegionMap(labels, count)


def region_histogram(img: np.ndarray, regions: RegionMap, region_id: int) -> np.ndarray:
    """Normalized 4096-bin quantized-RGB histogram of one region."""
    codes = quantize_codes(img)
    sel = regions.labels == region_id
    n = int(np.count_nonzero(sel))
    if n == 0:
        raise EmptyRegion(f"region {region_id} has no pixels")
    counts = np.bincount(codes[sel], minlength=4096).astype(np.float64)
    return counts / n


UNLABELED, OBJECT, BACKGROUND = 0, 1, 2


def _seed_labels(regions: RegionMap, markers: MarkerSet) -> np.ndarray:
    markers.validate()
    if not markers.object_mask.any() or not markers.background_mask.any():
        raise InvalidMarkers("both object and background strokes are required")
    if markers.object_mask.shape != regions.labels.shape:
        raise DimensionMismatch("markers do not match the region map")
    state = np.zeros(regions.region_count, dtype=np.int8)
    obj_ids = np.unique(regions.labels[markers.object_mask])
    bg_ids = np.unique(regions.labels[markers.background_mask])
    both = np.intersect1d(obj_ids, bg_ids)
    if len(both):
        raise InvalidMarkers(f"regions {both.tolist()} carry both marker kinds")
    state[obj_ids] = OBJECT
    state[bg_ids] = BACKGROUND
    return state


def msrm_merge(
    img: np.ndarray,
    regions: RegionMap,
    markers: MarkerSet,
    morph_radius: int = 0,
) -> np.ndarray:
    """Merge regions by maximal similarity from the marker seeds and return
    the object mask (cleaned up with ``morph_cleanup`` when radius > 0)."""
    codes = quantize_codes(img)
    label_state = _seed_labels(regions, markers)
    state = _MergeState(codes, regions.labels, regions.region_count)

    def unlabeled_ids():
        return [r for r in range(regions.region_count)
                if state.alive[r] and label_state[r] == UNLABELED]

    changed_outer = True
    while changed_outer:
        changed_outer = False
        # phase 1: expand background while it is some region's best neighbor
        while True:
            fired = False
            for r in unlabeled_ids():
                best = state.best_neighbor(r)
                if best >= 0 and label_state[best] == BACKGROUND:
                    state.merge(r, best)
                    fired = True
                    changed_outer = True
            if not fired:
                break
        # phase 2: merge mutually-maximal pairs of unlabeled regions
        while True:
            fired = False
            for r in unlabeled_ids():
                if not state.alive[r] or label_state[r] != UNLABELED:
                    continue
                best = state.best_neighbor(r)
                if (
                    best >= 0
                    and label_state[best] == UNLABELED
                    and state.best_neighbor(best) == r
                ):
                    lo, hi = min(r, best), max(r, best)
                    state.merge(hi, lo)
                    fired = True
                    changed_outer = True
            if not fired:
                break

    # survivors that never reached background join the object
    for r in unlabeled_ids():
        label_state[r] = OBJECT

    roots = np.array([state.find(r) for r in range(regions.region_count)], dtype=np.int64)
    mask = (label_state[roots] == OBJECT)[regions.labels]
    if not mask.any():  # pragma: no cover - object seeds are never merged away
        raise NoObject("no object region survived merging")
    if morph_radius > 0:
        mask = morph_cleanup(mask, morph_radius)
    else:
        mask = morph_cleanup(mask, 0)
    return mask


def apply_mask(img: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Keep object pixels, set background to black."""
    if img.shape[:2] != mask.shape:
        raise DimensionMismatch(f"image {img.shape[:2]} vs mask {mask.shape}")
    return img * mask[..., None].astype(np.uint8)


# --- marker wire formats ---

MARKER_OBJECT_RGB = (0, 255, 0)
MARKER_BACKGROUND_RGB = (255, 0, 0)


def read_marker_png(path, shape: tuple[int, int]) -> MarkerSet:
    """Batch-mode marker file: pure green pixels are object strokes, pure red
    background strokes; everything else is ignored."""
    from .imaging import load_image

    arr = load_image(path)
    if arr.shape[:2] != shape:
        raise DimensionMismatch(f"marker file {arr.shape[:2]} vs image {shape}")
    obj = np.all(arr == np.array(MARKER_OBJECT_RGB, dtype=np.uint8), axis=-1)
    bg = np.all(arr == np.array(MARKER_BACKGROUND_RGB, dtype=np.uint8), axis=-1)
    ms = MarkerSet(obj, bg)
    ms.validate()
    return ms


def markers_from_strokes(
    object_strokes: list[list[tuple[float, float]]],
    background_strokes: list[list[tuple[float, float]]],
    shape: tuple[int, int],
    width: int = 3,
) -> MarkerSet:
    """Rasterize stroke polylines (3 px wide by default) into a MarkerSet."""
    h, w = shape

    def rasterize(strokes):
        canvas = Image.new("1", (w, h), 0)
        draw = ImageDraw.Draw(canvas)
        any_inside = False
        for line in strokes:
            pts = [(float(x), float(y)) for x, y in line]
            if not pts:
                continue
            if any(0 <= x < w and 0 <= y < h for x, y in pts):
                any_inside = True
            if len(pts) == 1:
                draw.ellipse(
                    [pts[0][0] - width / 2, pts[0][1] - width / 2,
                     pts[0][0] + width / 2, pts[0][1] + width / 2],
                    fill=1,
                )
            else:
                draw.line(pts, fill=1, width=width)
        return np.array(canvas, dtype=bool), any_inside

    obj, obj_in = rasterize(object_strokes)
    bg, bg_in = rasterize(background_strokes)
    if not obj_in or not bg_in:
        raise InvalidMarkers("strokes out of bounds or missing on one side")
    bg &= ~obj  # overlap from wide rasterization resolves toward the object
    return MarkerSet(obj, bg)


@dataclass
class SegSession:
    """Live interactive state for the two-stage (flower then lip) workflow."""

    image: np.ndarray
    regions: RegionMap
    stage: str = "flower"  # flower -> lip -> done
    morph_radius: int = 1
    min_region: int = 20
    flower_mask: np.ndarray | None = None
    lip_mask: np.ndarray | None = None
    object_strokes: list = field(default_factory=list)
    background_strokes: list = field(default_factory=list)

    @classmethod
    def start(cls, img: np.ndarray, min_region: int = 20, morph_radius: int = 1) -> "SegSession":
        return cls(image=img, regions=oversegment(img, min_region),
                   morph_radius=morph_radius, min_region=min_region)

    def _active_image(self) -> np.ndarray:
        if self.stage == "lip":
            assert self.flower_mask is not None
            return apply_mask(self.image, self.flower_mask)
        return self.image

    def submit_strokes(self, object_strokes, background_strokes) -> np.ndarray:
        """Accumulate strokes for the active stage and recompute the merge."""
        self.object_strokes.extend(object_strokes)
        self.background_strokes.extend(background_strokes)
        markers = markers_from_strokes(
            self.object_strokes, self.background_strokes, self.image.shape[:2]
        )
        mask = msrm_merge(self._active_image(), self.regions, markers, self.morph_radius)
        if self.stage == "flower":
            self.flower_mask = mask
        else:
            assert self.flower_mask is not None
            mask = mask & self.flower_mask  # lip stays inside the flower
            self.lip_mask = mask
        return mask

    def advance(self) -> None:
        if self.stage == "flower":
            if self.flower_mask is None:
                raise InvalidMarkers("cannot advance before a flower result exists")
            self.stage = "lip"
            self.object_strokes = []
            self.background_strokes = []
            self.regions = oversegment(self._active_image(), self.min_region)
        elif self.stage == "lip":
            if self.lip_mask is None:
                raise InvalidMarkers("cannot finish before a lip result exists")
            self.stage = "done"
