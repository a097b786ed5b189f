"""Event dataset construction from detector output, and event classification.

Detections arrive as JSONL from any instance-segmentation detector; garments
are cropped to their bounding box with everything outside the polygon mask
set to exact black, so downstream foreground extraction is lossless.
"""
from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, ImageDraw

from .knn import LabeledFeatureSet, vote_distribution
from .lexicon import CisLexicon
from .preprocess import GarmentImage, outfit_concat_features, write_manifest

logger = logging.getLogger(__name__)

DEFAULT_EVENT_NAMES = (
    "concert", "graduation", "meeting", "mountain-trip", "picnic",
    "sea-holiday", "ski-holiday", "wedding", "conference", "exhibition",
    "fashion", "protest", "sport", "theater-dance",
)


@dataclass(frozen=True)
class EventCategory:
    id: int
    name: str


def default_event_categories() -> list[EventCategory]:
    return [EventCategory(id=i, name=n) for i, n in enumerate(DEFAULT_EVENT_NAMES)]


class PolygonError(ValueError):
    """Degenerate or out-of-bounds segmentation polygon."""


@dataclass
class Detection:
    source_image: str
    score: float
    bbox: tuple[int, int, int, int]  # x, y, w, h
    polygon: list[tuple[float, float]]
    garment_class: str
    event_label: int

    def __post_init__(self):
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"{self.source_image}: score {self.score} not in [0,1]")


@dataclass
class EventDatasetStats:
    total: int = 0
    skipped: int = 0
    train: int = 0
    test: int = 0
    per_category: Counter = field(default_factory=Counter)


def filter_detections(dets, threshold: float):
    """Keep detections with score strictly greater than ``threshold``."""
    if not (0.0 <= threshold <= 1.0):
        raise ValueError(f"threshold {threshold} not in [0,1]")
    return [d for d in dets if d.score > threshold]


def polygon_area(polygon) -> float:
    """Shoelace area; zero for degenerate polygons."""
    pts = np.asarray(polygon, dtype=np.float64)
    if len(pts) < 3:
        return 0.0
    x, y = pts[:, 0], pts[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def rasterize_polygon(polygon, width: int, height: int) -> np.ndarray:
    """Boolean fill mask of a polygon (image coordinates) on a W×H canvas."""
    canvas = Image.new("L", (width, height), 0)
    ImageDraw.Draw(canvas).polygon([tuple(p) for p in polygon], fill=255)
    return np.asarray(canvas) > 0


def composite_garment(det: Detection, source: GarmentImage) -> GarmentImage:
    """Crop to the detection bbox with polygon exterior set to exact black."""
    h, w = source.pixels.shape[:2]
    if polygon_area(det.polygon) == 0:
        raise PolygonError(f"{det.source_image}: degenerate polygon")
    pts = np.asarray(det.polygon, dtype=np.float64)
    if pts[:, 0].min() < 0 or pts[:, 1].min() < 0 or pts[:, 0].max() >= w or pts[:, 1].max() >= h:
        raise PolygonError(f"{det.source_image}: polygon outside image bounds")
    x, y, bw, bh = det.bbox
    if x < 0 or y < 0 or x + bw > w or y + bh > h or bw <= 0 or bh <= 0:
        raise PolygonError(f"{det.source_image}: bbox {det.bbox} outside image bounds")
    shifted = [(px - x, py - y) for px, py in det.polygon]
    mask = rasterize_polygon(shifted, bw, bh)
    if not mask.any():
        raise PolygonError(f"{det.source_image}: polygon rasterizes to no pixels")
    crop = source.pixels[y:y + bh, x:x + bw].copy()
    crop[~mask] = 0
    return GarmentImage(pixels=crop, mask=mask,
                        source_id=f"{det.source_image}@{x},{y},{bw},{bh}")


def assign_split(source_id: str, split_ratio: float) -> str:
    """Deterministic train/test assignment by hashing the record id."""
    digest = hashlib.sha1(source_id.encode("utf-8")).digest()
    frac = int.from_bytes(digest[:8], "big") / 2**64
    return "train" if frac < split_ratio else "test"


def detection_from_record(rec: dict) -> Detection:
    return Detection(
        source_image=rec["source_image"],
        score=float(rec["score"]),
        bbox=tuple(int(v) for v in rec["bbox"]),
        polygon=[(float(px), float(py)) for px, py in rec["polygon"]],
        garment_class=str(rec.get("garment_class", "")),
        event_label=int(rec["event_label"]),
    )


def build_event_dataset(detections, images_dir, threshold: float,
                        split_ratio: float, out_dir):
    """Filter, composite and write garment crops plus a JSONL manifest.

    Returns ``(manifest_records, stats)``. Missing source images are skipped
    and logged; output order is fixed by sorting on (source_image, bbox).
    """
    from pathlib import Path

    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    (out_dir / "garments").mkdir(parents=True, exist_ok=True)

    retained = filter_detections(list(detections), threshold)
    retained.sort(key=lambda d: (d.source_image, d.bbox))

    stats = EventDatasetStats()
    records = []
    for i, det in enumerate(retained):
        img_path = images_dir / det.source_image
        if not img_path.exists():
            logger.warning("missing source image %s, skipping", img_path)
            stats.skipped += 1
            continue
        source = GarmentImage(
            pixels=np.asarray(Image.open(img_path).convert("RGB")),
            source_id=det.source_image,
        )
        try:
            garment = composite_garment(det, source)
        except PolygonError as exc:
            logger.warning("skipping detection: %s", exc)
            stats.skipped += 1
            continue
        rec_id = garment.source_id
        split = assign_split(rec_id, split_ratio)
        stem = f"garment_{i:06d}"
        image_path = out_dir / "garments" / f"{stem}.png"
        mask_path = out_dir / "garments" / f"{stem}_mask.png"
        Image.fromarray(garment.pixels).save(image_path)
        Image.fromarray((garment.mask.astype(np.uint8)) * 255).save(mask_path)
        records.append({
            "source_id": rec_id,
            "image_path": str(image_path),
            "mask_path": str(mask_path),
            "garment_class": det.garment_class,
            "event_label": det.event_label,
            "split": split,
        })
        stats.total += 1
        stats.per_category[det.event_label] += 1
        if split == "train":
            stats.train += 1
        else:
            stats.test += 1
    write_manifest(records, out_dir / "manifest.jsonl")
    return records, stats


def classify_event(top: GarmentImage, bottom: GarmentImage,
                   model: LabeledFeatureSet, lexicon: CisLexicon,
                   categories=None, eps_bg: float = 0.0) -> np.ndarray:
    """Probability vector over event categories from neighbor votes."""
    if categories is None:
        cat_ids = np.unique(model.labels)
    else:
        cat_ids = np.array([c.id for c in categories], dtype=np.int64)
    hist = outfit_concat_features(top, bottom, lexicon, eps_bg=eps_bg)
    query = hist.to_vector(lexicon, normalize="l2")
    return vote_distribution(model, query, cat_ids)
