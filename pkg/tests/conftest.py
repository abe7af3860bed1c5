"""Shared fixtures: geometric masks with known properties and a small
synthetic dataset reused by the CLI, service, and acceptance suites."""

import subprocess
import sys

import numpy as np
import pytest

from flowerid import datastore as DS
from flowerid import features as F


def rasterize_disk(radius: int, pad: int = 4) -> np.ndarray:
    """Filled disk: pixel centers within `radius` of the center pixel."""
    n = 2 * radius + 1 + 2 * pad
    c = radius + pad
    yy, xx = np.mgrid[0:n, 0:n]
    return ((xx - c) ** 2 + (yy - c) ** 2 <= radius ** 2)


def rasterize_star(
    outer: float = 100.0, inner: float = 40.0, points: int = 5,
    rot: float = 0.0, pad: int = 8,
) -> np.ndarray:
    """Star with r(theta) = inner + (outer-inner)*(0.5+0.5*cos(p*theta))."""
    n = int(2 * outer) + 1 + 2 * pad
    c = outer + pad
    yy, xx = np.mgrid[0:n, 0:n]
    theta = np.arctan2(yy - c, xx - c)
    r = inner + (outer - inner) * (0.5 + 0.5 * np.cos(points * (theta - rot)))
    return np.hypot(xx - c, yy - c) <= r


@pytest.fixture(scope="session")
def disk100():
    return rasterize_disk(100)


@pytest.fixture(scope="session")
def square10():
    mask = np.zeros((18, 18), dtype=bool)
    mask[4:14, 4:14] = True
    return mask


@pytest.fixture(scope="session")
def star_mask():
    return rasterize_star()


@pytest.fixture(scope="session")
def lattice_circle():
    """36 lattice points all at distance exactly 65 from the origin.

    65^2 = 4225 has five distinct two-square representations, giving a
    boundary whose distances to the centroid are all identical, so the
    percentile statistics collapse (R10 = R90 = 65).
    Returns (contour array of (x, y), centroid at the origin).
    """
    reps = [(65, 0), (63, 16), (60, 25), (56, 33), (52, 39), (39, 52),
            (33, 56), (25, 60), (16, 63), (0, 65)]
    pts = set()
    for x, y in reps:
        for sx in (1, -1):
            for sy in (1, -1):
                pts.add((sx * x, sy * y))
    contour = np.array(sorted(pts), dtype=np.int64)
    assert len(contour) == 36
    assert np.all(contour[:, 0] ** 2 + contour[:, 1] ** 2 == 65 ** 2)
    from flowerid.imaging import Centroid
    return contour, Centroid(0.0, 0.0)


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """6 classes x 4 images (+1 holdout each), ground-truth masks included."""
    root = tmp_path_factory.mktemp("corpus6")
    DS.generate_synthetic_corpus(root, n_classes=6, per_class=4, seed=7)
    return root


@pytest.fixture(scope="session")
def small_features(small_corpus):
    entries = DS.ingest(small_corpus)
    rows, ids, genera, species = [], [], [], []
    for e in entries:
        from flowerid.imaging import load_image, load_mask
        img = load_image(e.image_path)
        fmask = load_mask(e.flower_mask_path)
        lmask = load_mask(e.lip_mask_path)
        rows.append(F.extract_image_features(img, fmask, lmask))
        ids.append(e.image_id)
        genera.append(e.genus)
        species.append(e.species)
    return DS.FeatureTable(
        image_ids=ids, genera=genera, species=species,
        rows=np.array(rows))


@pytest.fixture(scope="session")
def small_model(small_features):
    from flowerid import classifier as C
    t = small_features
    train = [i for i, iid in enumerate(t.image_ids) if iid.startswith("train/")]
    genus = {t.species[i]: t.genera[i] for i in train}
    params = C.SvmParams(kernel="rbf", c=30.0, g=0.009)
    return C.train_ovo(
        t.rows[train], [t.species[i] for i in train], params,
        class_genus=genus)


def run_cli(args, cwd=None):
    """Invoke the installed console script in a subprocess."""
    return subprocess.run(
        [sys.executable, "-m", "flowerid.cli", *map(str, args)],
        capture_output=True, text=True, cwd=cwd)
