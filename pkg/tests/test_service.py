"""HTTP session workflow: upload, region preview, staged markers, predict."""

import base64
import io

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from flowerid import classifier as C
from flowerid import datastore as DS
from flowerid.service import MAX_UPLOAD_BYTES, SessionStore, create_app


def render_case(class_id=0, seed=0):
    tpl = DS.ClassTemplate.build(class_id)
    return DS.render_flower(tpl, (160, 160), 0.0, 1.0, (0.0, 0.0), 0.0)


def holdout_case(corpus, index=0):
    """A held-out corpus image with its ground-truth masks."""
    from flowerid.imaging import load_image, load_mask
    holdouts = [e for e in DS.ingest(corpus) if e.role == "holdout"]
    e = holdouts[index]
    return (load_image(e.image_path), load_mask(e.flower_mask_path),
            load_mask(e.lip_mask_path), e.species, e.genus)


def png_bytes(img):
    buf = io.BytesIO()
    Image.fromarray(img).save(buf, format="PNG")
    return buf.getvalue()


def decode_mask(b64):
    arr = np.array(Image.open(io.BytesIO(base64.b64decode(b64))))
    return arr >= 128


def corner_strokes():
    return [[(2, 2), (10, 2)], [(150, 2), (158, 2)],
            [(2, 150), (2, 158)], [(150, 158), (158, 158)]]


@pytest.fixture(scope="module")
def app_client(tmp_path_factory, small_features):
    models = tmp_path_factory.mktemp("models")
    t = small_features
    train = [i for i, iid in enumerate(t.image_ids) if iid.startswith("train/")]
    model = C.train_ovo(
        t.rows[train], [t.species[i] for i in train],
        C.SvmParams(kernel="rbf", c=30.0, g=0.009),
        class_genus={t.species[i]: t.genera[i] for i in train})
    C.save_model(model, models / "demo.json")
    app = create_app(models_dir=models)
    return TestClient(app)


def drive_session(client, img, fmask, lmask, model_name="demo"):
    """Upload one image and run the full two-stage workflow."""
    r = client.post("/api/sessions",
                    files={"image": ("x.png", png_bytes(img), "image/png")})
    assert r.status_code == 200
    sid = r.json()["session_id"]

    ys, xs = np.nonzero(fmask)
    cy, cx = float(ys.mean()), float(xs.mean())
    lys, lxs = np.nonzero(lmask)
    lcy, lcx = float(lys.mean()), float(lxs.mean())

    r = client.post(f"/api/sessions/{sid}/markers", json={
        "stage": "flower",
        "object_strokes": [[(cx, cy), (cx, cy - 20)]],
        "background_strokes": corner_strokes(),
        "advance": True})
    assert r.status_code == 200
    flower = decode_mask(r.json()["mask_png"])

    r = client.post(f"/api/sessions/{sid}/markers", json={
        "stage": "lip",
        "object_strokes": [[(lcx, lcy), (lcx + 2, lcy)]],
        "background_strokes": [[(cx, cy - 25), (cx, cy - 30)]] + corner_strokes(),
        "advance": True})
    assert r.status_code == 200
    lip = decode_mask(r.json()["mask_png"])

    r = client.post(f"/api/sessions/{sid}/predict", json={"model": model_name})
    assert r.status_code == 200
    return sid, flower, lip, r.json()


class TestWorkflow:
    def test_full_session(self, app_client, small_corpus):
        img, fmask, lmask, species, genus = holdout_case(small_corpus, 0)
        sid, flower, lip, pred = drive_session(app_client, img, fmask, lmask)
        assert (flower ^ fmask).mean() < 0.01
        assert (lip ^ lmask).mean() < 0.01
        assert pred["species"] == species
        assert pred["genus"] == genus
        assert len(pred["votes"]) <= 5

    def test_region_overlay_is_png(self, app_client):
        img, _, _ = render_case(0)
        r = app_client.post(
            "/api/sessions",
            files={"image": ("x.png", png_bytes(img), "image/png")})
        sid = r.json()["session_id"]
        r = app_client.get(f"/api/sessions/{sid}/regions")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        overlay = np.array(Image.open(io.BytesIO(r.content)))
        assert overlay.shape == img.shape

    def test_upload_reports_dimensions(self, app_client):
        img, _, _ = render_case(2)
        r = app_client.post(
            "/api/sessions",
            files={"image": ("x.png", png_bytes(img), "image/png")})
        doc = r.json()
        assert doc["width"] == 160 and doc["height"] == 160


class TestErrorPaths:
    def test_unknown_session_404(self, app_client):
        assert app_client.get("/api/sessions/nope/regions").status_code == 404

    def test_undecodable_upload_400(self, app_client):
        r = app_client.post(
            "/api/sessions",
            files={"image": ("x.png", b"garbage", "image/png")})
        assert r.status_code == 400

    def test_oversize_upload_413(self, app_client):
        blob = b"\x00" * (MAX_UPLOAD_BYTES + 1)
        r = app_client.post(
            "/api/sessions", files={"image": ("x.png", blob, "image/png")})
        assert r.status_code == 413

    def test_wrong_stage_409(self, app_client):
        img, fmask, lmask = render_case(0)
        sid, *_ = drive_session(app_client, img, fmask, lmask)
        r = app_client.post(f"/api/sessions/{sid}/markers", json={
            "stage": "flower", "object_strokes": [[(1, 1)]],
            "background_strokes": [[(2, 2)]]})
        assert r.status_code == 409

    def test_bad_markers_422(self, app_client):
        img, _, _ = render_case(0)
        r = app_client.post(
            "/api/sessions",
            files={"image": ("x.png", png_bytes(img), "image/png")})
        sid = r.json()["session_id"]
        r = app_client.post(f"/api/sessions/{sid}/markers", json={
            "stage": "flower",
            "object_strokes": [[(500.0, 500.0)]],  # off-canvas
            "background_strokes": [[(2.0, 2.0)]]})
        assert r.status_code == 422

    def test_predict_before_done_409(self, app_client):
        img, _, _ = render_case(0)
        r = app_client.post(
            "/api/sessions",
            files={"image": ("x.png", png_bytes(img), "image/png")})
        sid = r.json()["session_id"]
        r = app_client.post(f"/api/sessions/{sid}/predict",
                            json={"model": "demo"})
        assert r.status_code == 409

    def test_unknown_model_404(self, app_client):
        img, fmask, lmask = render_case(0)
        sid, *_ = drive_session(app_client, img, fmask, lmask)
        r = app_client.post(f"/api/sessions/{sid}/predict",
                            json={"model": "missing"})
        assert r.status_code == 404


class TestSessionStore:
    def test_lru_eviction(self):
        store = SessionStore(capacity=2)
        a = store.create(object())
        b = store.create(object())
        store.get(a)  # refresh a; b is now least recent
        c = store.create(object())
        store.get(a)
        store.get(c)
        with pytest.raises(KeyError):
            store.get(b)

    def test_ids_unique(self):
        store = SessionStore(capacity=64)
        ids = {store.create(object()) for _ in range(32)}
        assert len(ids) == 32
