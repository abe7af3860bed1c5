"""Acceptance gate: one test per release criterion, each printing a single
PASS/FAIL line.  Tolerances are pinned here and nowhere else."""

import json
import statistics
import time

import numpy as np
import pytest

from flowerid import classifier as C
from flowerid import datastore as DS
from flowerid import features as F
from flowerid.imaging import (
    Centroid, centroid_of, load_image, load_mask, region_geometry,
    trace_contour)

from conftest import rasterize_disk, rasterize_star, run_cli
from test_classifier import (
    annulus, dual_value, qp_reference_alpha, small_instances)


def announce(capsys, ok: bool, label: str) -> None:
    with capsys.disabled():
        print(f"{'PASS' if ok else 'FAIL'}: {label}")
    assert ok, label


@pytest.fixture(scope="session")
def corpus30(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus30")
    DS.generate_synthetic_corpus(root, n_classes=30, per_class=10, seed=7)
    return root


@pytest.fixture(scope="session")
def features30(corpus30, tmp_path_factory):
    out = tmp_path_factory.mktemp("feat30") / "features.csv"
    r = run_cli(["extract", "--dataset", corpus30, "--out", out])
    assert r.returncode == 0, r.stderr
    return out


@pytest.fixture(scope="session")
def table30(features30):
    return DS.load_features(features30)


def masked_star(rot=0.0, outer=100.0, inner=40.0):
    mask = rasterize_star(outer=outer, inner=inner, rot=rot)
    img = np.zeros(mask.shape + (3,), dtype=np.uint8)
    img[mask] = (210, 50, 80)
    return img, mask


def test_a1_feature_layout(capsys):
    """111 features with every table slot occupied by the right quantity."""
    img, fmask = masked_star()
    lmask = np.zeros_like(fmask)
    lmask[90:130, 80:150] = fmask[90:130, 80:150]
    vec = F.extract_image_features(img, fmask, lmask)
    flower = F.extract_region_features(img, fmask)
    lip = F.extract_region_features(img, lmask)
    fd = F.fractal_dimension(trace_contour(fmask))
    ok = vec.shape == (111,) and np.all(np.isfinite(vec))
    checks = [
        (vec[0], flower.sf1), (vec[1], flower.sf2), (vec[2], flower.roundness),
        (vec[46], lip.sf1), (vec[47], lip.sf2), (vec[48], lip.roundness),
        (vec[109], flower.aspect_ratio), (vec[110], lip.aspect_ratio),
    ]
    ok = ok and all(a == b for a, b in checks)
    ok = ok and np.array_equal(vec[3:10], flower.hu)
    ok = ok and np.array_equal(vec[10:46], flower.ccd)
    ok = ok and np.array_equal(vec[49:56], lip.hu)
    ok = ok and np.array_equal(vec[56:92], lip.ccd)
    ok = ok and np.array_equal(vec[92:98], flower.color.cf)
    ok = ok and np.array_equal(vec[98:104], lip.color.cf)
    ok = ok and np.array_equal(
        vec[104:109], list(fd.dimensions) + [fd.mean_dimension])
    announce(capsys, ok, "A1 feature vector layout (111 slots, exact map)")


def test_a2_descriptor_oracles(capsys, lattice_circle):
    """Hand-derived values for circle, square, line fixtures."""
    square = np.zeros((14, 14), dtype=bool)
    square[2:12, 2:12] = True
    disk = rasterize_disk(100)

    ok = abs(F.hu_raw(square)[0] - 1 / 6) <= 2e-3
    ok = ok and abs(F.hu_raw(disk)[0] - 1 / (2 * np.pi)) <= 2e-3

    geom = region_geometry(square, trace_contour(square))
    ok = ok and abs(
        F.roundness(geom) - 4 * np.pi * 100 / 36 ** 2) <= 1e-6

    line = np.stack([np.arange(5, 133), np.full(128, 10)], axis=1)
    fd = F.fractal_dimension(line)
    ok = ok and fd.dimensions == [1.0, 1.0, 1.0, 1.0]

    contour, c = lattice_circle
    sig = F.boundary_distances(contour, c)
    ok = ok and F.sf2(sig) == 1.0
    announce(capsys, ok, "A2 descriptor oracles (Hu, roundness, line FD, circle SF2)")


def test_a3_invariance_suite(capsys):
    """Translation bit-exact; rotation and scale within pinned tolerances."""
    img, mask = masked_star()
    big = rasterize_star(pad=30)
    big_img = np.zeros(big.shape + (3,), dtype=np.uint8)
    big_img[big] = (210, 50, 80)
    shifted = np.zeros_like(big)
    shifted[9:, 6:] = big[:-9, :-6]
    shifted_img = np.zeros_like(big_img)
    shifted_img[9:, 6:] = big_img[:-9, :-6]
    ok = np.array_equal(
        F.extract_image_features(big_img, big, None),
        F.extract_image_features(shifted_img, shifted, None))

    base = F.extract_region_features(img, mask)
    base_raw_hu = F.hu_raw(mask)

    def hu_within(other_mask, tol=0.1):
        raw = F.hu_raw(other_mask)
        logged = F.hu_moments(other_mask)
        base_logged = F.hu_moments(mask)
        for ra, rb, la, lb in zip(base_raw_hu, raw, base_logged, logged):
            # log-domain comparison is meaningful only above raster noise;
            # a symmetric star analytically zeroes all but the first entry
            if min(abs(ra), abs(rb)) > 1e-6:
                if abs(la - lb) > tol:
                    return False
            elif max(abs(ra), abs(rb)) > 1e-4:
                return False
        return True

    for deg in (10, 37, 90):
        rmask = rasterize_star(rot=np.deg2rad(deg))
        rimg = np.zeros(rmask.shape + (3,), dtype=np.uint8)
        rimg[rmask] = (210, 50, 80)
        rot = F.extract_region_features(rimg, rmask)
        filled = (base.ccd > 0) & (rot.ccd > 0)
        ok = ok and np.abs(base.ccd[filled] - rot.ccd[filled]).max() <= 0.05
        ok = ok and hu_within(rmask)
        ok = ok and abs(base.sf1 - rot.sf1) <= 0.05

    for factor, (o, i) in ((0.5, (50.0, 20.0)), (2.0, (200.0, 80.0))):
        smask = rasterize_star(outer=o, inner=i)
        simg = np.zeros(smask.shape + (3,), dtype=np.uint8)
        simg[smask] = (210, 50, 80)
        sc = F.extract_region_features(simg, smask)
        ok = ok and abs(sc.sf1 - base.sf1) <= 0.05 * max(base.sf1, 1e-9)
        ok = ok and abs(sc.sf2 - base.sf2) <= 0.05
        ok = ok and abs(sc.roundness - base.roundness) <= 0.05 * base.roundness
        filled = (base.ccd > 0) & (sc.ccd > 0)
        ok = ok and np.abs(base.ccd[filled] - sc.ccd[filled]).max() <= 0.05
    announce(capsys, ok, "A3 invariance (translation exact, rotation, scale)")


def test_a4_svm_correctness(capsys):
    """SMO vs dense QP, KKT residuals, XOR, annulus kernel ranking."""
    from flowerid import kernels as kmod
    ok = True
    for kernel in ("linear", "rbf", "poly"):
        params = C.SvmParams(kernel=kernel, c=2.0, g=0.5, r=1.0, d=3)
        for x, y in small_instances():
            K = C.kernel_matrix(params, x, x)
            alpha, _, _, conv = kmod.solve_smo(
                np.ascontiguousarray(K), y, 2.0, 1e-3, 10 ** 6)
            ok = ok and conv
            ref = qp_reference_alpha(K, y, 2.0)
            ok = ok and abs(
                dual_value(alpha, K, y) - dual_value(ref, K, y)) <= 1e-4
            g = (np.outer(y, y) * K) @ alpha - 1.0
            up = ((alpha < 2.0 - 1e-9) & (y > 0)) | ((alpha > 1e-9) & (y < 0))
            lo = ((alpha < 2.0 - 1e-9) & (y < 0)) | ((alpha > 1e-9) & (y > 0))
            m = np.max(-y[up] * g[up]) if up.any() else -np.inf
            M = np.min(-y[lo] * g[lo]) if lo.any() else np.inf
            ok = ok and (m - M <= 1e-3)

    x = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    lin = C.train_binary(x, y, C.SvmParams(kernel="linear", c=10.0))
    lin_acc = np.mean(
        [np.sign(C.predict_binary(lin, xi)) == yi for xi, yi in zip(x, y)])
    rbf = C.train_binary(x, y, C.SvmParams(kernel="rbf", c=10.0, g=2.0))
    rbf_acc = np.mean(
        [np.sign(C.predict_binary(rbf, xi)) == yi for xi, yi in zip(x, y)])
    ok = ok and lin_acc <= 0.75 and rbf_acc == 1.0

    rows, labels = annulus()
    grid = [C.SvmParams(kernel="linear", c=c) for c in (1.0, 10.0, 100.0)]
    grid += [C.SvmParams(kernel="rbf", c=c, g=g)
             for c in (1.0, 10.0) for g in (0.5, 2.0)]
    ranked = C.grid_search(rows, labels, grid, k=5, seed=0)
    best_p, best_acc = ranked[0]
    lin_best = max(acc for p, acc in ranked if p.kernel == "linear")
    ok = ok and best_p.kernel == "rbf" and best_acc - lin_best >= 0.2
    announce(capsys, ok, "A4 SVM correctness (QP oracle, KKT, XOR, annulus)")


def test_a5_pipeline_accuracy(capsys, table30):
    """Full-vector CV accuracy and the lip-region contribution."""
    t = table30
    train = [i for i, iid in enumerate(t.image_ids)
             if iid.startswith("train/")]
    rows = t.rows[train]
    labels = [t.species[i] for i in train]
    params = C.SvmParams(kernel="rbf", c=30.0, g=0.009)
    full = C.kfold_cv(rows, labels, params, k=5, seed=0).mean_accuracy
    flower_only = C.kfold_cv(
        rows, labels, params, subset=DS.resolve_group("FlowerOnly"),
        k=5, seed=0).mean_accuracy
    ok = full >= 0.90 and (full - flower_only) >= 0.10
    announce(
        capsys, ok,
        f"A5 synthetic-corpus accuracy (full CV {full:.3f} >= 0.90, "
        f"lip gain {full - flower_only:+.3f} >= +0.10)")


def test_a6_group_ablation(capsys, features30):
    """The evaluate command ranks feature groups; All stays competitive."""
    r = run_cli(["evaluate", "--features", features30, "--k", 5])
    ok = r.returncode == 0
    rows = [json.loads(l) for l in r.stdout.splitlines()] if ok else []
    names = {x["group"] for x in rows}
    expected = {"All", "Group1", "Group2", "Group3", "Group4", "Group5",
                "Group6", "FlowerOnly", "LipOnly"}
    ok = ok and names == expected
    if ok:
        accs = [x["mean_accuracy"] for x in rows]
        ok = accs == sorted(accs, reverse=True)
        all_acc = next(x["mean_accuracy"] for x in rows if x["group"] == "All")
        worst_gap = max(
            x["mean_accuracy"] - all_acc for x in rows if x["group"] != "All")
        ok = ok and all(
            all_acc >= x["mean_accuracy"] - 0.03 for x in rows)
        announce(
            capsys, ok,
            f"A6 feature-group ablation (All within 3 points of every group; "
            f"worst gap {worst_gap:+.3f})")
    else:
        announce(capsys, False, "A6 feature-group ablation")


def test_a7_timing_budget(capsys):
    """One large image extracts quickly; the lip roughly doubles the cost."""
    tpl = DS.ClassTemplate.build(4)
    img, fmask, lmask = DS.render_flower(
        tpl, (500, 600), 0.3, 1.0, (0.0, 0.0), 0.0)
    F.extract_image_features(img, fmask, lmask)  # warm any compilation

    # interleave the two measurements so load spikes hit both alike
    both_times, flower_times = [], []
    for _ in range(7):
        t0 = time.perf_counter()
        F.extract_image_features(img, fmask, lmask)
        both_times.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        F.extract_image_features(img, fmask, None)
        flower_times.append(time.perf_counter() - t0)
    t_both = statistics.median(both_times)
    t_flower = statistics.median(flower_times)
    ratio = t_both / t_flower
    ok = t_both <= 1.0 and 1.5 <= ratio <= 2.5
    announce(
        capsys, ok,
        f"A7 timing budget (600x500 both {t_both * 1000:.0f} ms <= 1000, "
        f"ratio {ratio:.2f} in [1.5, 2.5])")


def test_a8_determinism(capsys, tmp_path):
    """Same seeds, same bytes: corpus, features, model, report."""
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        r = run_cli(["synth", "--out", d / "corpus", "--classes", 3,
                     "--per-class", 3, "--seed", 11])
        assert r.returncode == 0, r.stderr
        r = run_cli(["extract", "--dataset", d / "corpus",
                     "--out", d / "features.csv"])
        assert r.returncode == 0, r.stderr
        r = run_cli(["train", "--features", d / "features.csv",
                     "--out", d / "model.json", "--k", 3, "--seed", 4])
        assert r.returncode == 0, r.stderr
        report = json.loads(r.stdout)
        report.pop("model")  # path differs between the two runs
        del report["cv"]["seconds_per_image"]  # wall time is not replayable
        outs.append((
            (d / "features.csv").read_bytes(),
            (d / "model.json").read_bytes(),
            json.dumps(report, sort_keys=True)))
    ok = outs[0] == outs[1]
    announce(capsys, ok, "A8 determinism (features, model, report byte-identical)")


def test_a9_scripted_web_sessions(capsys, corpus30, table30, tmp_path):
    """Ten holdout images through the HTTP API: masks and predictions."""
    from fastapi.testclient import TestClient
    from flowerid.service import create_app
    from test_service import decode_mask, drive_session

    t = table30
    train = [i for i, iid in enumerate(t.image_ids)
             if iid.startswith("train/")]
    model = C.train_ovo(
        t.rows[train], [t.species[i] for i in train],
        C.SvmParams(kernel="rbf", c=30.0, g=0.009),
        class_genus={t.species[i]: t.genera[i] for i in train})
    models = tmp_path / "models"
    models.mkdir()
    C.save_model(model, models / "demo.json")
    client = TestClient(create_app(models_dir=models))

    holdouts = [e for e in DS.ingest(corpus30) if e.role == "holdout"]
    picked = holdouts[::3][:10]  # every third class for variety
    assert len(picked) == 10
    mask_ok = 0
    top1 = 0
    for e in picked:
        img = load_image(e.image_path)
        fmask = load_mask(e.flower_mask_path)
        lmask = load_mask(e.lip_mask_path)
        _, flower, lip, pred = drive_session(client, img, fmask, lmask)
        if (flower ^ fmask).mean() <= 0.01 and (lip ^ lmask).mean() <= 0.01:
            mask_ok += 1
        if pred["species"] == e.species:
            top1 += 1
    ok = mask_ok == 10 and top1 >= 9
    announce(
        capsys, ok,
        f"A9 scripted web sessions (masks {mask_ok}/10 within 1%, "
        f"top-1 {top1}/10 >= 9)")


@pytest.mark.xfail(
    reason="log N / log 2^k on a smooth curve grows with k faster than the "
    "documented [0.9, 1.15] band; the literal formula is kept because the "
    "line and filled-shape anchors pin it", strict=True)
def test_circle_boxcount_band():
    """A radius-200 circle's per-level box-count dimension stays near 1."""
    ang = np.linspace(0, 2 * np.pi, 4000, endpoint=False)
    pts = np.unique(np.stack([
        np.round(200 + 200 * np.cos(ang)).astype(np.int64),
        np.round(200 + 200 * np.sin(ang)).astype(np.int64)], axis=1), axis=0)
    fd = F.fractal_dimension(pts)
    assert all(0.9 <= d <= 1.15 for d in fd.dimensions)
