"""HTTP facade for the interactive two-stage segmentation workflow.

Sessions live in memory with LRU eviction; each session serializes its own
mutations behind a lock, so distinct sessions can run concurrently.  Binary
images travel base64-encoded inside JSON responses.
"""

from __future__ import annotations

import base64
import io
import secrets
import threading
import time
from collections import OrderedDict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, HTTPException, UploadFile
from fastapi.responses import Response
from fastapi.staticfiles import StaticFiles
from PIL import Image, UnidentifiedImageError
from pydantic import BaseModel

from . import classifier as C
from . import features as F
from .errors import FlowerIdError, InvalidMarkers
from .imaging import resize_to_limit
from .segmentation import SegSession, apply_mask

MAX_UPLOAD_BYTES = 10 * 1024 * 1024


class SessionStore:
    """session_id -> SegSession with strict least-recently-used eviction."""

    def __init__(self, capacity: int = 64):
        self.capacity = capacity
        self._sessions: OrderedDict[str, tuple[SegSession, threading.Lock]] = OrderedDict()
        self._lock = threading.Lock()

    def create(self, session: SegSession) -> str:
        sid = secrets.token_hex(16)  # 128 random bits
        with self._lock:
            self._sessions[sid] = (session, threading.Lock())
            while len(self._sessions) > self.capacity:
                self._sessions.popitem(last=False)
        return sid

    def get(self, sid: str) -> tuple[SegSession, threading.Lock]:
        with self._lock:
            if sid not in self._sessions:
                raise KeyError(sid)
            self._sessions.move_to_end(sid)
            return self._sessions[sid]


def _png_b64(arr: np.ndarray, mode: str) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


class MarkersRequest(BaseModel):
    stage: str
    object_strokes: list[list[tuple[float, float]]]
    background_strokes: list[list[tuple[float, float]]]
    advance: bool = False


class PredictRequest(BaseModel):
    model: str


def create_app(models_dir=None, session_capacity: int = 64,
               static_dir=None) -> FastAPI:
    app = FastAPI(title="flowerid")
    store = SessionStore(session_capacity)
    models: dict[str, C.TrainedModel] = {}
    if models_dir:
        for p in sorted(Path(models_dir).glob("*.json")):
            models[p.stem] = C.load_model(p)

    def get_session(sid: str):
        try:
            return store.get(sid)
        except KeyError:
            raise HTTPException(status_code=404, detail="unknown session")

    @app.post("/api/sessions")
    async def create_session(image: UploadFile = File(...)):
        data = await image.read()
        if len(data) > MAX_UPLOAD_BYTES:
            raise HTTPException(status_code=413, detail="upload too large")
        try:
            img = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
        except (UnidentifiedImageError, OSError):
            raise HTTPException(status_code=400, detail="cannot decode image")
        img = resize_to_limit(img)
        session = SegSession.start(img)
        sid = store.create(session)
        return {"session_id": sid, "width": img.shape[1], "height": img.shape[0]}

    @app.get("/api/sessions/{sid}/regions")
    def region_overlay(sid: str):
        session, lock = get_session(sid)
        with lock:
            labels = session.regions.labels
            img = session.image.copy()
            edge = np.zeros(labels.shape, dtype=bool)
            edge[:, 1:] |= labels[:, 1:] != labels[:, :-1]
            edge[1:, :] |= labels[1:, :] != labels[:-1, :]
            img[edge] = (255, 255, 0)
        buf = io.BytesIO()
        Image.fromarray(img, mode="RGB").save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/api/sessions/{sid}/markers")
    def submit_markers(sid: str, req: MarkersRequest):
        session, lock = get_session(sid)
        with lock:
            if req.stage not in ("flower", "lip"):
                raise HTTPException(status_code=422, detail="bad stage name")
            if req.stage != session.stage:
                raise HTTPException(
                    status_code=409,
                    detail=f"session is at stage {session.stage!r}")
            try:
                mask = session.submit_strokes(
                    req.object_strokes, req.background_strokes)
            except InvalidMarkers as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            except FlowerIdError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            masked = apply_mask(session.image, mask)
            out = {
                "stage": session.stage,
                "mask_png": _png_b64(
                    np.where(mask, 255, 0).astype(np.uint8), "L"),
                "masked_image_png": _png_b64(masked, "RGB"),
            }
            if req.advance:
                session.advance()
            out["next_stage"] = session.stage
            return out

    @app.post("/api/sessions/{sid}/predict")
    def predict(sid: str, req: PredictRequest):
        session, lock = get_session(sid)
        if req.model not in models:
            raise HTTPException(status_code=404, detail="unknown model")
        model = models[req.model]
        with lock:
            if session.flower_mask is None or session.lip_mask is None:
                raise HTTPException(
                    status_code=409, detail="segmentation incomplete")
            t0 = time.perf_counter()
            vec = F.extract_image_features(
                session.image, session.flower_mask, session.lip_mask)
            species, tally = C.predict_ovo(model, vec)
            dt = time.perf_counter() - t0
        top5 = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
        return {
            "species": species,
            "genus": model.class_genus.get(species, ""),
            "votes": top5,
            "seconds": dt,
        }

    static = Path(static_dir) if static_dir else Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if static.is_dir():
        app.mount("/", StaticFiles(directory=static, html=True), name="webui")
    return app
