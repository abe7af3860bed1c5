"""Shape and color descriptors and the 111-dimensional feature vector.

Per region (flower or lip): shape factors SF1/SF2 from percentile means of
boundary-to-centroid distances, a 36-slot centroid contour distance signature,
roundness 4*pi*A/P^2, aspect ratio, seven moment invariants, and six
dominant-color features from a 12x6 hue-saturation histogram.  The box-count
fractal dimension is computed once, on the flower boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateShape, DimensionMismatch, EmptyMask, EmptyResult,
    TooFewBoundaryPoints)
from .imaging import (
    Centroid,
    RegionGeometry,
    centroid_of,
    region_geometry,
    rgb_to_hs_image,
    trace_contour,
)

N_FEATURES = 111
FD_LEVELS = (4, 5, 6, 7)  # grid subdivisions 2^k
LOG_FLOOR = 1e-30


@dataclass
class ContourSignature:
    distances: np.ndarray  # d_i per boundary pixel
    n: int
    r10: float  # mean of the ceil(N/10) smallest d_i
    r90: float  # mean of the ceil(N/10) largest d_i
    normalized: np.ndarray  # D_i in [0, 1]


@dataclass
class BoxCountSeries:
    levels: tuple
    box_counts: list
    dimensions: list
    mean_dimension: float


@dataclass
class HsHistogram:
    ch: np.ndarray  # 72 probabilities, index = hbin*6 + sbin


@dataclass
class DominantColorFeatures:
    cf: tuple  # (dx2, dy2, p2, dx3, dy3, p3)


@dataclass
class RegionFeatures:
    sf1: float
    sf2: float
    roundness: float
    aspect_ratio: float
    hu: np.ndarray  # 7 signed log-magnitudes
    ccd: np.ndarray  # 36 normalized distances
    color: DominantColorFeatures


def boundary_distances(contour: np.ndarray, c: Centroid) -> ContourSignature:
    """Distances d_i from every boundary pixel to the centroid, percentile
    means R10/R90, and the clamped normalized distances D_i.

    The d_i >= R90 branch is tested first so the degenerate R10 = R90 case
    (all distances equal) yields D_i = 1 everywhere.
    """
    n = len(contour)
    if n < 10:
        raise TooFewBoundaryPoints(f"{n} boundary points, need >= 10")
    d = np.hypot(contour[:, 0] - c.gx, contour[:, 1] - c.gy)
    m = math.ceil(n / 10)
    ds = np.sort(d)
    r10 = float(ds[:m].mean())
    r90 = float(ds[-m:].mean())
    normalized = np.where(
        d >= r90, 1.0,
        np.where(d <= r10, 0.0, (d - r10) / (r90 - r10) if r90 > r10 else 0.0),
    )
    return ContourSignature(d, n, r10, r90, normalized)


def sf1(sig: ContourSignature) -> float:
    """R10 / R90: sharpness of petal tips (1 for a circle, small for spiky)."""
    if sig.r90 <= 0:
        raise DegenerateShape("R90 is zero")
    return sig.r10 / sig.r90


def sf2(sig: ContourSignature) -> float:
    """Mean of the normalized distances D_i."""
    return float(sig.normalized.mean())


def ccd36(contour: np.ndarray, c: Centroid) -> np.ndarray:
    """Centroid contour distance sampled at multiples of 10 degrees.

    Zero degrees starts at the boundary pixel farthest from the centroid
    (ties: smallest index).  Each pixel's relative angle is rounded to the
    nearest whole degree; a slot takes the farthest pixel among those that
    land exactly on its multiple of 10, else 0.  All 36 values are divided
    by the maximal distance, so slot 0 is always 1.
    """
    n = len(contour)
    if n < 10:
        raise TooFewBoundaryPoints(f"{n} boundary points, need >= 10")
    dx = contour[:, 0] - c.gx
    dy = contour[:, 1] - c.gy
    d = np.hypot(dx, dy)
    ref = int(np.argmax(d))
    dmax = float(d[ref])
    if dmax <= 0:
        raise DegenerateShape("all boundary pixels coincide with the centroid")
    theta = np.degrees(np.arctan2(dy, dx))
    rel = np.mod(theta - theta[ref], 360.0)
    rounded = np.floor(rel + 0.5).astype(np.int64) % 360  # half-up: 359.5 -> 0
    values = np.zeros(36)
    on_multiple = rounded % 10 == 0
    slots = rounded[on_multiple] // 10
    np.maximum.at(values, slots, d[on_multiple])
    return values / dmax


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain on integer points; returns hull vertices CCW."""
    pts = np.unique(points, axis=0)
    if len(pts) <= 2:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def aspect_ratio(contour: np.ndarray) -> float:
    """Physiological width over physiological length.

    Length is the maximal pairwise distance between contour points (the
    convex hull diameter); width is the minimal directional extent of the
    hull (its breadth).  The result is clamped to (0, 1].
    """
    if len(contour) < 2:
        raise DegenerateShape("need at least 2 contour points")
    # anchor at the bounding-box corner so translated contours are identical
    contour = contour - contour.min(axis=0)
    hull = _convex_hull(contour).astype(np.float64)
    diff = hull[:, None, :] - hull[None, :, :]
    d2 = (diff ** 2).sum(axis=-1)
    length = math.sqrt(float(d2.max()))
    if length <= 0:
        raise DegenerateShape("contour has zero diameter")
    # breadth: minimum over hull-edge normal directions of the projection extent
    edges = np.roll(hull, -1, axis=0) - hull
    norms = np.hypot(edges[:, 0], edges[:, 1])
    keep = norms > 0
    normals = np.stack([-edges[keep, 1], edges[keep, 0]], axis=1) / norms[keep, None]
    proj = hull @ normals.T  # (n_hull, n_edges)
    width = float((proj.max(axis=0) - proj.min(axis=0)).min()) if normals.size else 0.0
    if width <= 0:
        width = length  # degenerate collinear hull
    return min(width / length, 1.0)


def roundness(geom: RegionGeometry) -> float:
    """4*pi*A / P^2 (about 1 for a disk with the chain-code perimeter)."""
    if geom.perimeter <= 0:
        raise DegenerateShape("zero perimeter")
    return 4.0 * math.pi * geom.area / geom.perimeter ** 2


def hu_raw(mask: np.ndarray) -> np.ndarray:
    """The seven raw moment invariants from normalized central moments."""
    if np.count_nonzero(mask) < 2:
        raise DegenerateShape("need at least 2 object pixels")
    # anchor the bounding box at the frame corner: central moments are
    # unchanged and the summation order no longer depends on where the
    # object sits, so translated masks give bit-identical results
    ys, xs = np.nonzero(mask)
    crop = mask[ys.min():ys.max() + 1, xs.min():xs.max() + 1]
    anchored = np.zeros_like(mask)
    anchored[:crop.shape[0], :crop.shape[1]] = crop
    mask = anchored
    h, w = mask.shape
    ys, xs = np.mgrid[0:h, 0:w]
    f = mask.astype(np.float64)
    m00 = f.sum()
    xbar = (xs * f).sum() / m00
    ybar = (ys * f).sum() / m00
    dx = xs - xbar
    dy = ys - ybar

    def mu(p, q):
        return ((dx ** p) * (dy ** q) * f).sum()

    def eta(p, q):
        return mu(p, q) / m00 ** (1.0 + (p + q) / 2.0)

    n20, n02, n11 = eta(2, 0), eta(0, 2), eta(1, 1)
    n30, n03, n21, n12 = eta(3, 0), eta(0, 3), eta(2, 1), eta(1, 2)
    phi1 = n20 + n02
    phi2 = (n20 - n02) ** 2 + 4 * n11 ** 2
    phi3 = (n30 - 3 * n12) ** 2 + (3 * n21 - n03) ** 2
    phi4 = (n30 + n12) ** 2 + (n21 + n03) ** 2
    phi5 = (
        (n30 - 3 * n12) * (n30 + n12)
        * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
        + (3 * n21 - n03) * (n21 + n03)
        * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2)
    )
    phi6 = (
        (n20 - n02) * ((n30 + n12) ** 2 - (n21 + n03) ** 2)
        + 4 * n11 * (n30 + n12) * (n21 + n03)
    )
    phi7 = (
        (3 * n21 - n03) * (n30 + n12)
        * ((n30 + n12) ** 2 - 3 * (n21 + n03) ** 2)
        - (n30 - 3 * n12) * (n21 + n03)
        * (3 * (n30 + n12) ** 2 - (n21 + n03) ** 2)
    )
    return np.array([phi1, phi2, phi3, phi4, phi5, phi6, phi7])


def hu_moments(mask: np.ndarray) -> np.ndarray:
    """Moment invariants stored as sign(phi) * log10(|phi| + 1e-30) for
    numeric conditioning."""
    phi = hu_raw(mask)
    return np.sign(phi) * np.log10(np.abs(phi) + LOG_FLOOR)


def fractal_dimension(contour: np.ndarray) -> BoxCountSeries:
    """Box-count dimension of the boundary at grid subdivisions 2^k, k=4..7.

    The contour's bounding square (side = larger bounding-box extent) is cut
    into 2^k x 2^k boxes; D(s) = log N(s) / log 2^k, plus the mean of the
    four values.
    """
    if len(contour) == 0:
        raise EmptyResult("empty contour")
    x0, y0 = contour[:, 0].min(), contour[:, 1].min()
    side = int(max(contour[:, 0].max() - x0 + 1, contour[:, 1].max() - y0 + 1))
    counts = []
    dims = []
    for k in FD_LEVELS:
        nb = 1 << k
        # integer arithmetic keeps straight-line fixtures exact
        bx = np.minimum((contour[:, 0] - x0) * nb // side, nb - 1)
        by = np.minimum((contour[:, 1] - y0) * nb // side, nb - 1)
        occupied = len(np.unique(bx * nb + by))
        counts.append(occupied)
        dims.append(math.log(occupied) / math.log(nb) if occupied > 0 else 0.0)
    return BoxCountSeries(FD_LEVELS, counts, dims, float(np.mean(dims)))


# --- color ---

N_HUE_BINS = 12
N_SAT_BINS = 6


def hs_bin(h: float, s: float) -> int:
    """0-based cell index: hbin * 6 + sbin."""
    hbin = min(int(h // 30.0), N_HUE_BINS - 1)
    sbin = min(int(s * N_SAT_BINS), N_SAT_BINS - 1)
    return hbin * N_SAT_BINS + sbin


def hs_histogram(img: np.ndarray, mask: np.ndarray) -> HsHistogram:
    """72-cell hue-saturation histogram over the object pixels only."""
    if not mask.any():
        raise EmptyMask("mask has no object pixels")
    h, s = rgb_to_hs_image(img)
    hv = h[mask]
    sv = s[mask]
    hbin = np.minimum((hv // 30.0).astype(np.int64), N_HUE_BINS - 1)
    sbin = np.minimum((sv * N_SAT_BINS).astype(np.int64), N_SAT_BINS - 1)
    counts = np.bincount(hbin * N_SAT_BINS + sbin, minlength=72).astype(np.float64)
    return HsHistogram(counts / counts.sum())


def cell_center(index: int) -> tuple[float, float]:
    """(H degrees, S) center of a 0-based cell index."""
    hbin, sbin = divmod(index, N_SAT_BINS)
    return hbin * 30.0 + 15.0, (sbin + 0.5) / N_SAT_BINS


def dominant_color_features(hist: HsHistogram) -> DominantColorFeatures:
    """Coordinates and probabilities of the two most probable foreground
    cells (ties: lower cell index).  Background is excluded upstream, so
    these are the 2nd and 3rd dominant cells of the masked image (the 1st
    would always be the black background)."""
    order = np.argsort(-hist.ch, kind="stable")
    out = []
    for rank in range(2):
        idx = int(order[rank]) if rank < len(order) else 0
        p = float(hist.ch[idx]) if rank < len(order) else 0.0
        if p <= 0:
            out.extend([0.0, 0.0, 0.0])
            continue
        hc, sc = cell_center(idx)
        rad = math.radians(hc)
        out.extend([sc * math.cos(rad), sc * math.sin(rad), p])
    return DominantColorFeatures(tuple(out))


# --- composition ---

def extract_region_features(img: np.ndarray, mask: np.ndarray) -> RegionFeatures:
    """All per-region descriptors for a cleaned-up mask."""
    if not mask.any():
        raise EmptyMask("mask has no object pixels")
    contour = trace_contour(mask)
    c = centroid_of(mask)
    geom = region_geometry(mask, contour)
    sig = boundary_distances(contour, c)
    return RegionFeatures(
        sf1=sf1(sig),
        sf2=sf2(sig),
        roundness=roundness(geom),
        aspect_ratio=aspect_ratio(contour),
        hu=hu_moments(mask),
        ccd=ccd36(contour, c),
        color=dominant_color_features(hs_histogram(img, mask)),
    )


# 1-based Table-layout slices (inclusive ranges)
FLOWER_SF1, FLOWER_SF2, FLOWER_ROUNDNESS = 1, 2, 3
FLOWER_HU = (4, 10)
FLOWER_CCD = (11, 46)
FLOWER_COLOR = (93, 98)
FLOWER_AR = 110
LIP_SF1, LIP_SF2, LIP_ROUNDNESS = 47, 48, 49
LIP_HU = (50, 56)
LIP_CCD = (57, 92)
LIP_COLOR = (99, 104)
LIP_AR = 111
FD_SLOTS = (105, 109)


def assemble_vector(
    flower: RegionFeatures,
    lip: RegionFeatures | None,
    flower_fd: BoxCountSeries,
) -> np.ndarray:
    """Place the region features at their table positions (f1..f111).

    ``lip=None`` is the flower-only ablation mode: every lip slot is zero.
    """
    f = np.zeros(N_FEATURES)

    def put(region: RegionFeatures, sf1_i, sf2_i, round_i, hu_r, ccd_r, col_r, ar_i):
        f[sf1_i - 1] = region.sf1
        f[sf2_i - 1] = region.sf2
        f[round_i - 1] = region.roundness
        f[hu_r[0] - 1:hu_r[1]] = region.hu
        f[ccd_r[0] - 1:ccd_r[1]] = region.ccd
        f[col_r[0] - 1:col_r[1]] = region.color.cf
        f[ar_i - 1] = region.aspect_ratio

    put(flower, FLOWER_SF1, FLOWER_SF2, FLOWER_ROUNDNESS,
        FLOWER_HU, FLOWER_CCD, FLOWER_COLOR, FLOWER_AR)
    if lip is not None:
        put(lip, LIP_SF1, LIP_SF2, LIP_ROUNDNESS,
            LIP_HU, LIP_CCD, LIP_COLOR, LIP_AR)
    f[FD_SLOTS[0] - 1:FD_SLOTS[1]] = list(flower_fd.dimensions) + [flower_fd.mean_dimension]
    return f


def extract_image_features(
    img: np.ndarray,
    flower_mask: np.ndarray,
    lip_mask: np.ndarray | None,
) -> np.ndarray:
    """Full 111-dim feature vector for one image from its two region masks."""
    for mask in (flower_mask, lip_mask):
        if mask is not None and mask.shape != img.shape[:2]:
            raise DimensionMismatch(
                f"mask {mask.shape} vs image {img.shape[:2]}")
    flower = extract_region_features(img, flower_mask)
    fd = fractal_dimension(trace_contour(flower_mask))
    lip = extract_region_features(img, lip_mask) if lip_mask is not None else None
    return assemble_vector(flower, lip, fd)
