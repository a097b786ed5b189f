"""HTTP service exposing classification, recommendation and evaluation.

All shared state (lexicon, store, event model) is loaded once at startup and
treated as immutable, so request handling needs no locking. Store rebuilds
happen through the CLI; the service picks them up on restart.
"""
from __future__ import annotations

import io
import threading
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from PIL import Image

from .events import default_event_categories
from .knn import LabeledFeatureSet
from .lexicon import load_lexicon
from .memory import (
    Condition,
    ConditioningClassifiers,
    load_store,
    recommend,
    recommend_conditioned,
)
from .preprocess import (
    EmptyForegroundError,
    GarmentImage,
    load_garment_image,
    outfit_concat_features,
    read_manifest,
)
from .style import StyleClassifierConfig, classify_style

MAX_UPLOAD_BYTES = 8 * 1024 * 1024
MAX_IMAGE_PIXELS = 4096 * 4096


@dataclass
class ServiceConfig:
    lexicon_path: str
    store_path: str
    theta: float
    distance_variant: str = "l2"
    event_train_manifest: str | None = None
    event_k: int = 1
    asset_dir: str | None = None
    max_upload_bytes: int = MAX_UPLOAD_BYTES

    def validate(self):
        for label, path in (("lexicon", self.lexicon_path),
                            ("store", self.store_path)):
            if not Path(path).exists():
                raise FileNotFoundError(f"{label} file not found: {path}")
        if self.event_train_manifest and not Path(self.event_train_manifest).exists():
            raise FileNotFoundError(
                f"event training manifest not found: {self.event_train_manifest}")
        if self.asset_dir and not Path(self.asset_dir).is_dir():
            raise FileNotFoundError(f"asset dir not found: {self.asset_dir}")


def _build_event_model(manifest_path, lexicon, k: int):
    feats, labels = [], []
    for rec in read_manifest(manifest_path):
        top = load_garment_image(rec["top_image"], rec.get("top_mask"),
                                 source_id=rec.get("source_id", ""))
        bottom = load_garment_image(rec["bottom_image"], rec.get("bottom_mask"),
                                    source_id=rec.get("source_id", ""))
        hist = outfit_concat_features(top, bottom, lexicon)
        feats.append(hist.to_vector(lexicon, normalize="l2"))
        labels.append(int(rec["labels"]["event"]))
    if not feats:
        return None
    return LabeledFeatureSet(features=np.stack(feats), labels=np.array(labels),
                             k=min(k, len(feats)))


async def _decode_upload(upload: UploadFile, max_bytes: int) -> GarmentImage:
    data = await upload.read()
    if len(data) > max_bytes:
        raise HTTPException(413, detail="image upload too large")
    try:
        img = Image.open(io.BytesIO(data))
        if img.width * img.height > MAX_IMAGE_PIXELS:
            raise HTTPException(413, detail="image dimensions too large")
        pixels = np.asarray(img.convert("RGB"), dtype=np.uint8)
    except HTTPException:
        raise
    except Exception:
        raise HTTPException(400, detail="could not decode image")
    return GarmentImage(pixels=pixels, source_id=upload.filename or "upload")


def _match_payload(match, lexicon):
    return {
        "d_star": match.d_star,
        "matched_triplet": match.matched_triplet,
        "permutation": match.permutation,
        "pattern": match.pattern,
        "pattern_name": lexicon.pattern(match.pattern).name,
        "accepted": match.accepted,
    }


def create_app(config: ServiceConfig) -> FastAPI:
    config.validate()
    lexicon = load_lexicon(config.lexicon_path)
    store = load_store(config.store_path)
    style_cfg = StyleClassifierConfig(theta=config.theta,
                                      distance_variant=config.distance_variant)
    event_model = None
    if config.event_train_manifest:
        event_model = _build_event_model(config.event_train_manifest, lexicon,
                                         config.event_k)
    categories = default_event_categories()
    cat_ids = np.array([c.id for c in categories], dtype=np.int64)
    classifiers = ConditioningClassifiers(style_cfg=style_cfg,
                                          event_model=event_model,
                                          event_categories=cat_ids)
    eval_lock = threading.Lock()

    app = FastAPI(title="stylerec")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/health")
    def health():
        return {"status": "ok", "store_entries": len(store.entries)}

    @app.get("/patterns")
    def patterns():
        return [
            {"id": p.id, "name": p.name, "warm_cool": p.warm_cool,
             "soft_hard": p.soft_hard}
            for p in lexicon.patterns
        ]

    @app.get("/events")
    def events():
        return [{"id": c.id, "name": c.name} for c in categories]

    def _resolve_target(kind: str, target: str | None):
        if kind == "none":
            return None
        if target is None:
            raise HTTPException(400, detail="condition target required")
        if kind == "style":
            for p in lexicon.patterns:
                if target in (str(p.id), p.name):
                    return p.id
            raise HTTPException(400, detail=f"unknown style pattern {target!r}")
        for c in categories:
            if target in (str(c.id), c.name):
                return c.id
        raise HTTPException(400, detail=f"unknown event category {target!r}")

    @app.post("/recommend")
    async def post_recommend(
        top: UploadFile = File(None),
        top_path: str = Form(None),
        k: int = Form(5),
        kind: str = Form("none"),
        target: str = Form(None),
        mode: str = Form("filter"),
        min_posterior: float = Form(0.0),
    ):
        query = await _load_query_image(top, top_path)
        if k < 1:
            raise HTTPException(400, detail="k must be >= 1")
        try:
            cond = Condition(kind=kind, target=_resolve_target(kind, target),
                             mode=mode, min_posterior=min_posterior)
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        if cond.kind == "event" and event_model is None:
            raise HTTPException(503, detail="no event model configured")
        try:
            if cond.kind == "none":
                result = recommend(store, query, k, lexicon)
            else:
                result = recommend_conditioned(store, query, k, cond,
                                               classifiers, lexicon)
        except EmptyForegroundError:
            raise HTTPException(400, detail="query image has no foreground")
        except ValueError as exc:
            raise HTTPException(400, detail=str(exc))
        return {
            "query_id": result.query_id,
            "k": k,
            "shortfall": result.shortfall,
            "proposals": [
                {
                    "bottom_id": p.bottom_id,
                    "score": p.score,
                    "style": _match_payload(p.style, lexicon) if p.style else None,
                    "event_posterior": (p.event_posterior.tolist()
                                        if p.event_posterior is not None else None),
                }
                for p in result.proposals
            ],
        }

    async def _load_query_image(top, top_path):
        if top is not None and top.filename:
            return await _decode_upload(top, config.max_upload_bytes)
        if top_path:
            try:
                return load_garment_image(top_path)
            except FileNotFoundError:
                raise HTTPException(400, detail="referenced image not found")
        raise HTTPException(400, detail="provide a top upload or top_path")

    @app.post("/classify/style")
    async def post_classify_style(top: UploadFile = File(...),
                                  bottom: UploadFile = File(...)):
        t = await _decode_upload(top, config.max_upload_bytes)
        b = await _decode_upload(bottom, config.max_upload_bytes)
        try:
            match = classify_style(t, b, lexicon, style_cfg)
        except EmptyForegroundError:
            raise HTTPException(400, detail="image has no foreground")
        return _match_payload(match, lexicon)

    @app.post("/classify/event")
    async def post_classify_event(top: UploadFile = File(...),
                                  bottom: UploadFile = File(...)):
        if event_model is None:
            raise HTTPException(503, detail="no event model configured")
        from .events import classify_event

        t = await _decode_upload(top, config.max_upload_bytes)
        b = await _decode_upload(bottom, config.max_upload_bytes)
        try:
            posterior = classify_event(t, b, event_model, lexicon,
                                       categories=categories)
        except EmptyForegroundError:
            raise HTTPException(400, detail="image has no foreground")
        return {
            "posterior": posterior.tolist(),
            "categories": [c.name for c in categories],
            "argmax": categories[int(np.argmax(posterior))].name,
        }

    @app.post("/evaluate")
    def post_evaluate(payload: dict):
        from .experiment import ConfigError, run_experiment

        if not eval_lock.acquire(blocking=False):
            raise HTTPException(409, detail="an evaluation is already running")
        try:
            out_dir = payload.get("out_dir", "eval_out")
            report = run_experiment(payload, out_dir)
            return report.to_json()
        except ConfigError as exc:
            raise HTTPException(400, detail=str(exc))
        finally:
            eval_lock.release()

    if config.asset_dir:
        app.mount("/", StaticFiles(directory=config.asset_dir, html=True),
                  name="ui")
    return app


def serve(config: ServiceConfig, host: str = "127.0.0.1", port: int = 8000):
    import uvicorn

    uvicorn.run(create_app(config), host=host, port=port)
