"""Dataset ingestion, feature-table persistence, feature-group registry, and
the synthetic corpus generator used for desk-scale evaluation.

Dataset layout: ``root/<genus>/<species>/<image files>`` with optional
sidecars ``<name>.mask.flower.png``, ``<name>.mask.lip.png``,
``<name>.markers.flower.png``, ``<name>.markers.lip.png`` and an optional
``holdout/`` subtree of the same shape.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateImageId,
    EmptyDataset,
    InconsistentTaxonomy,
    IoError,
    SchemaError,
    UnknownGroup,
    UnsupportedClassCount,
)
from .features import N_FEATURES
from .imaging import save_image, save_mask

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
SIDECAR_MARKERS = (".mask.flower.png", ".mask.lip.png",
                   ".markers.flower.png", ".markers.lip.png")


@dataclass
class DatasetEntry:
    image_id: str
    genus: str
    species: str
    role: str  # "train" or "holdout"
    image_path: Path
    flower_marker_path: Path | None = None
    lip_marker_path: Path | None = None
    flower_mask_path: Path | None = None
    lip_mask_path: Path | None = None


def _is_sidecar(p: Path) -> bool:
    return any(p.name.endswith(s) for s in SIDECAR_MARKERS)


def _scan_subtree(base: Path, role: str) -> list[DatasetEntry]:
    entries = []
    if not base.is_dir():
        return entries
    for genus_dir in sorted(p for p in base.iterdir() if p.is_dir()):
        if role == "train" and genus_dir.name == "holdout":
            continue
        for species_dir in sorted(p for p in genus_dir.iterdir() if p.is_dir()):
            for img in sorted(species_dir.iterdir()):
                if img.suffix.lower() not in IMAGE_SUFFIXES or _is_sidecar(img):
                    continue
                stem = img.with_suffix("")
                def sidecar(suffix):
                    p = Path(str(stem) + suffix)
                    return p if p.exists() else None
                entries.append(DatasetEntry(
                    image_id=f"{role}/{genus_dir.name}/{species_dir.name}/{img.stem}",
                    genus=genus_dir.name,
                    species=species_dir.name,
                    role=role,
                    image_path=img,
                    flower_marker_path=sidecar(".markers.flower.png"),
                    lip_marker_path=sidecar(".markers.lip.png"),
                    flower_mask_path=sidecar(".mask.flower.png"),
                    lip_mask_path=sidecar(".mask.lip.png"),
                ))
    return entries


def ingest(root) -> list[DatasetEntry]:
    """Deterministic index of a dataset tree, sorted by path."""
    root = Path(root)
    if not root.is_dir():
        raise IoError(f"{root} is not a directory")
    entries = _scan_subtree(root, "train") + _scan_subtree(root / "holdout", "holdout")
    if not entries:
        raise EmptyDataset(f"no images under {root}")
    seen_ids = set()
    species_genus: dict[str, str] = {}
    for e in entries:
        if e.image_id in seen_ids:
            raise DuplicateImageId(e.image_id)
        seen_ids.add(e.image_id)
        prior = species_genus.setdefault(e.species, e.genus)
        if prior != e.genus:
            raise InconsistentTaxonomy(
                f"species {e.species!r} under both {prior!r} and {e.genus!r}")
    return entries


# --- feature table ---

@dataclass
class FeatureTable:
    image_ids: list
    genera: list
    species: list
    rows: np.ndarray  # (n, 111)


FEATURE_CSV_HEADER = ["image_id", "genus", "species"] + [
    f"f{i}" for i in range(1, N_FEATURES + 1)
]


def save_features(table: FeatureTable, path) -> None:
    with open(path, "w") as fh:
        fh.write(",".join(FEATURE_CSV_HEADER) + "\n")
        for iid, gen, sp, row in zip(
            table.image_ids, table.genera, table.species, table.rows
        ):
            vals = ",".join(repr(float(v)) for v in row)
            fh.write(f"{iid},{gen},{sp},{vals}\n")


def load_features(path) -> FeatureTable:
    try:
        with open(path) as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if not lines:
        raise SchemaError("empty feature file")
    header = lines[0].split(",")
    if header != FEATURE_CSV_HEADER:
        raise SchemaError(
            f"bad header: {len(header)} columns, expected {len(FEATURE_CSV_HEADER)}")
    ids, genera, species, rows = [], [], [], []
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(FEATURE_CSV_HEADER):
            raise SchemaError(f"line {ln}: {len(parts)} columns")
        ids.append(parts[0])
        genera.append(parts[1])
        species.append(parts[2])
        try:
            rows.append([float(v) for v in parts[3:]])
        except ValueError as exc:
            raise SchemaError(f"line {ln}: {exc}") from exc
    if len(set(ids)) != len(ids):
        raise DuplicateImageId("feature table has repeated image ids")
    return FeatureTable(ids, genera, species, np.asarray(rows, dtype=np.float64))


# --- feature group registry ---

def _rng(a, b):
    return set(range(a, b + 1))


_BASE_GROUPS = {
    "CCD": _rng(11, 46) | _rng(57, 92),
    "MI": _rng(4, 10) | _rng(50, 56),
    "HSV": _rng(93, 104),
    "SF1": {1, 47},
    "SF2": {2, 48},
    "Roundness": {3, 49},
    "AR": {110, 111},
    "FD": _rng(105, 109),
}

GROUP_REGISTRY = {
    **_BASE_GROUPS,
    "Group1": _BASE_GROUPS["CCD"] | _BASE_GROUPS["MI"],
    "Group2": _BASE_GROUPS["CCD"] | _BASE_GROUPS["HSV"],
    "Group3": _BASE_GROUPS["MI"] | _BASE_GROUPS["HSV"],
    "Group4": _BASE_GROUPS["CCD"] | _BASE_GROUPS["MI"] | _BASE_GROUPS["HSV"],
    "Group5": (_BASE_GROUPS["SF1"] | _BASE_GROUPS["SF2"]
               | _BASE_GROUPS["Roundness"] | _BASE_GROUPS["HSV"]),
    "Group6": _BASE_GROUPS["MI"] | _BASE_GROUPS["FD"],
    "All": _rng(1, 111),
    "FlowerOnly": _rng(1, 46) | _rng(93, 98) | {110},
    "LipOnly": _rng(47, 92) | _rng(99, 104) | {111},
}


def resolve_group(name: str) -> list:
    """Sorted 1-based f-indices for a registered group name."""
    if name not in GROUP_REGISTRY:
        raise UnknownGroup(f"unknown feature group {name!r}")
    return sorted(GROUP_REGISTRY[name])


# --- synthetic corpus ---

MAX_CLASSES = 30


def _hsv_to_rgb(h: float, s: float, v: float) -> tuple[int, int, int]:
    h = h % 360.0
    c = v * s
    x = c * (1 - abs((h / 60.0) % 2 - 1))
    m = v - c
    seg = int(h // 60) % 6
    r, g, b = [(c, x, 0), (x, c, 0), (0, c, x), (0, x, c), (x, 0, c), (c, 0, x)][seg]
    return (
        int(round((r + m) * 255)),
        int(round((g + m) * 255)),
        int(round((b + m) * 255)),
    )


@dataclass(frozen=True)
class ClassTemplate:
    """Rendering parameters for one synthetic species.

    Species come in pairs sharing the flower silhouette and both region hues;
    only the lip geometry differs, so flower-region features alone cannot
    separate the pair.
    """
    class_id: int
    genus: str
    species: str
    petals: int
    sharpness: float
    flower_hue: float
    lip_hue: float
    lip_variant: int  # 0 = narrow ellipse, 1 = three-lobed blob

    @classmethod
    def build(cls, c: int) -> "ClassTemplate":
        t = c // 2  # shared flower template per pair
        hue = (t % 12) * 30.0 + 15.0  # cell centers: +/-5 deg jitter stays put
        return cls(
            class_id=c,
            genus=f"genus{c // 3:02d}",
            species=f"species{c:02d}",
            petals=4 + t % 6,
            sharpness=0.35 + 0.12 * (t // 6),
            flower_hue=hue,
            lip_hue=(hue + 180.0) % 360.0,
            lip_variant=c % 2,
        )


def render_flower(
    template: ClassTemplate,
    size: tuple[int, int],
    rotation: float,
    scale: float,
    shift: tuple[float, float],
    hue_jitter: float,
):
    """Render one synthetic flower; returns (image, flower_mask, lip_mask)."""
    h, w = size
    cx = w / 2.0 + shift[0]
    cy = h / 2.0 + shift[1]
    yy, xx = np.mgrid[0:h, 0:w]
    theta = np.arctan2(yy - cy, xx - cx)
    rho = np.hypot(xx - cx, yy - cy)
    r_out = 0.36 * min(h, w) * scale
    s = template.sharpness
    radial = r_out * (1.0 - s + s * (0.5 + 0.5 * np.cos(template.petals * (theta - rotation))))
    flower = rho <= radial

    lip_r = 0.45 * r_out * (1.0 - s)
    if template.lip_variant == 0:
        # narrow ellipse aligned with the rotation
        ex = (xx - cx) * math.cos(rotation) + (yy - cy) * math.sin(rotation)
        ey = -(xx - cx) * math.sin(rotation) + (yy - cy) * math.cos(rotation)
        lip = (ex / (1.6 * lip_r)) ** 2 + (ey / (0.55 * lip_r)) ** 2 <= 1.0
    else:
        # three-lobed blob; radius shrunk so both variants cover the same
        # area and the lip fraction of the flower histogram carries no signal
        lr = lip_r * math.sqrt(0.88 / (1.0 + 0.125))
        lip = rho <= lr * (1.0 + 0.5 * np.cos(3.0 * (theta - rotation)))
    lip &= flower

    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[flower] = _hsv_to_rgb(template.flower_hue + hue_jitter, 0.85, 0.9)
    img[lip] = _hsv_to_rgb(template.lip_hue + hue_jitter, 0.9, 0.9)
    return img, flower, lip


def _marker_png(shape, obj_points, bg_points) -> np.ndarray:
    """Marker wire image: green disks = object strokes, red = background."""
    h, w = shape
    arr = np.zeros((h, w, 3), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    for (px, py) in bg_points:
        arr[(xx - px) ** 2 + (yy - py) ** 2 <= 4] = (255, 0, 0)
    for (px, py) in obj_points:
        arr[(xx - px) ** 2 + (yy - py) ** 2 <= 4] = (0, 255, 0)
    return arr


def generate_synthetic_corpus(
    out_dir,
    n_classes: int = 30,
    per_class: int = 10,
    seed: int = 7,
    size: tuple[int, int] = (160, 160),
    holdout_per_class: int = 1,
) -> list[ClassTemplate]:
    """Render a labeled dataset tree with ground-truth masks and markers.

    Pure function of its arguments: a fixed seed reproduces the tree bit for
    bit.  Holdout images use per-image seeds disjoint from the training ones.
    """
    if not 0 <= n_classes <= MAX_CLASSES:
        raise UnsupportedClassCount(f"{n_classes} classes; at most {MAX_CLASSES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    templates = [ClassTemplate.build(c) for c in range(n_classes)]

    def render_one(template, dest_dir, name, img_seed):
        rng = np.random.default_rng(img_seed)
        rotation = float(rng.uniform(0, 2 * math.pi))
        scale = float(rng.uniform(0.8, 1.2))
        shift = tuple(rng.uniform(-5, 5, size=2))
        hue_jitter = float(rng.uniform(-5, 5))
        img, flower, lip = render_flower(
            template, size, rotation, scale, shift, hue_jitter)
        dest_dir.mkdir(parents=True, exist_ok=True)
        base = dest_dir / name
        save_image(img, base.with_suffix(".png"))
        save_mask(flower, Path(str(base) + ".mask.flower.png"))
        save_mask(lip, Path(str(base) + ".mask.lip.png"))
        # stroke points: lip centroid and a petal point are object for the
        # flower stage; corners are background
        ys, xs = np.nonzero(lip)
        lip_pt = (int(xs.mean()), int(ys.mean()))
        ang = rotation  # center of petal 0
        h_, w_ = size
        petal_pt = (
            int(w_ / 2 + shift[0] + 0.8 * 0.36 * min(size) * scale * math.cos(ang)),
            int(h_ / 2 + shift[1] + 0.8 * 0.36 * min(size) * scale * math.sin(ang)),
        )
        corners = [(3, 3), (w_ - 4, 3), (3, h_ - 4), (w_ - 4, h_ - 4)]
        fm = _marker_png(size, [lip_pt, petal_pt], corners)
        save_image(fm, Path(str(base) + ".markers.flower.png"))
        lm = _marker_png(size, [lip_pt], corners + [petal_pt])
        save_image(lm, Path(str(base) + ".markers.lip.png"))

    for template in templates:
        for i in range(per_class):
            render_one(
                template,
                out / template.genus / template.species,
                f"img{i:03d}",
                seed * 1_000_003 + template.class_id * 1_009 + i,
            )
        for i in range(holdout_per_class):
            render_one(
                template,
                out / "holdout" / template.genus / template.species,
                f"hold{i:03d}",
                seed * 1_000_003 + template.class_id * 1_009 + 500_000 + i,
            )

    manifest = {
        "seed": seed,
        "size": list(size),
        "per_class": per_class,
        "holdout_per_class": holdout_per_class,
        "classes": [
            {
                "class_id": t.class_id,
                "genus": t.genus,
                "species": t.species,
                "petals": t.petals,
                "sharpness": t.sharpness,
                "flower_hue": t.flower_hue,
                "lip_hue": t.lip_hue,
                "lip_variant": t.lip_variant,
            }
            for t in templates
        ],
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return templates
