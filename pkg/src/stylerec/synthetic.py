"""Synthetic desk-scale outfit datasets for tests and demo experiments.

Outfits are tiny PNG pairs whose pixels are drawn from lexicon palette colors,
so every stage of the pipeline (quantization, triplet matching, retrieval) is
exercised end to end without any external imagery.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .lexicon import CisLexicon

BOTTOM_CATEGORIES = ("pants", "skirt", "shorts", "jeans")


def garment_pixels(rng, lexicon: CisLexicon, color_ids, weights,
                   size: int = 8) -> np.ndarray:
    """Random image whose pixels are palette colors drawn with given weights."""
    ids = rng.choice(color_ids, size=size * size, p=weights)
    rgb = np.array([lexicon.color(int(c)).rgb for c in ids], dtype=np.uint8)
    return rgb.reshape(size, size, 3)


def make_outfit_dataset(lexicon: CisLexicon, n: int, seed: int, out_dir,
                        image_size: int = 8, n_events: int = 14):
    """Write ``n`` synthetic outfit PNG pairs plus a JSONL manifest.

    Each outfit is built around a lexicon triplet, so its ground-truth style
    pattern is the triplet's pattern; event labels are drawn with a
    pattern-dependent bias so the event classifier has signal to learn.
    """
    rng = np.random.default_rng(seed)
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(n):
        t_idx = int(rng.integers(len(lexicon.triplets)))
        triplet = lexicon.triplets[t_idx]
        c0, c1, c2 = triplet.color_ids
        # top dominated by the first triplet color, bottom by the second;
        # the third appears in both so the pair's top-3 hits the triplet
        top = garment_pixels(rng, lexicon, [c0, c2], [0.7, 0.3], image_size)
        bottom = garment_pixels(rng, lexicon, [c1, c2], [0.8, 0.2], image_size)
        event = int((triplet.pattern_id + int(rng.integers(0, 2))) % n_events)
        sid = f"outfit-{i:05d}"
        top_path = out_dir / "images" / f"{sid}_top.png"
        bottom_path = out_dir / "images" / f"{sid}_bottom.png"
        Image.fromarray(top).save(top_path)
        Image.fromarray(bottom).save(bottom_path)
        dominant_bottom = c1
        records.append({
            "source_id": sid,
            "top_image": str(top_path),
            "bottom_image": str(bottom_path),
            "bottom_id": f"bottom-{i:05d}",
            "labels": {
                "pattern": triplet.pattern_id,
                "event": event,
                "bottom_category": BOTTOM_CATEGORIES[i % len(BOTTOM_CATEGORIES)],
                "bottom_color": int(dominant_bottom),
            },
        })
    manifest = out_dir / "outfits.jsonl"
    with open(manifest, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
    return records, manifest
