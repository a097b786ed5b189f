"""Image preprocessing: foreground extraction, palette quantization, top-3 colors.

All functions are pure; batches can be processed in parallel without shared
state. Foreground extraction follows the black-background convention when no
mask is available.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .lexicon import CisLexicon, nearest_palette_ids


class EmptyForegroundError(ValueError):
    """No pixel survived foreground extraction; the image is unusable."""


@dataclass
class GarmentImage:
    pixels: np.ndarray  # (H, W, 3) uint8
    mask: np.ndarray | None = None  # (H, W) bool, True = foreground
    source_id: str = ""

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.uint8)
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"{self.source_id}: pixels must be (H, W, 3)")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != self.pixels.shape[:2]:
                raise ValueError(
                    f"{self.source_id}: mask shape {self.mask.shape} does not "
                    f"match image {self.pixels.shape[:2]}"
                )


@dataclass
class ColorHistogram:
    """Counts of foreground pixels per palette color id."""

    counts: dict[int, int] = field(default_factory=dict)
    total: int = 0

    def add(self, other: "ColorHistogram") -> "ColorHistogram":
        merged = dict(self.counts)
        for cid, n in other.counts.items():
            merged[cid] = merged.get(cid, 0) + n
        return ColorHistogram(counts=merged, total=self.total + other.total)

    def to_vector(self, lexicon: CisLexicon, normalize: str = "l2") -> np.ndarray:
        """Dense vector over the palette (ascending color id)."""
        vec = np.zeros(len(lexicon.palette_ids), dtype=np.float64)
        pos = {int(cid): i for i, cid in enumerate(lexicon.palette_ids)}
        for cid, n in self.counts.items():
            vec[pos[cid]] = n
        if normalize == "l2":
            norm = np.linalg.norm(vec)
            if norm > 0:
                vec /= norm
        elif normalize == "l1":
            if self.total > 0:
                vec /= self.total
        elif normalize != "none":
            raise ValueError(f"unknown normalization {normalize!r}")
        return vec


@dataclass(frozen=True)
class OutfitTriple:
    """Three most frequent palette colors, most frequent first."""

    colors: tuple[int, int, int]
    padded: bool = False


def load_garment_image(image_path, mask_path=None, source_id: str | None = None) -> GarmentImage:
    """Read a PNG garment image and optional single-channel mask PNG."""
    img = Image.open(image_path).convert("RGB")
    pixels = np.asarray(img, dtype=np.uint8)
    mask = None
    if mask_path is not None:
        m = Image.open(mask_path).convert("L")
        mask = np.asarray(m) > 0
    return GarmentImage(pixels=pixels, mask=mask,
                        source_id=source_id or str(image_path))


def extract_foreground(img: GarmentImage, eps_bg: float = 0.0) -> np.ndarray:
    """Return foreground pixels as an (n, 3) array (a multiset of RGB values).

    With a mask, exactly the masked pixels. Without one, pixels whose distance
    from pure black exceeds ``eps_bg``.
    """
    if img.pixels.size == 0:
        raise EmptyForegroundError(f"{img.source_id}: empty image")
    if img.mask is not None:
        fg = img.pixels[img.mask]
    else:
        flat = img.pixels.reshape(-1, 3).astype(np.float64)
        dist = np.linalg.norm(flat, axis=1)
        fg = img.pixels.reshape(-1, 3)[dist > eps_bg]
    if fg.shape[0] == 0:
        raise EmptyForegroundError(f"{img.source_id}: no foreground pixels")
    return fg


def quantize_histogram(lexicon: CisLexicon, fg: np.ndarray) -> ColorHistogram:
    """Quantize foreground pixels to the palette and tally per-color counts."""
    fg = np.asarray(fg).reshape(-1, 3)
    if fg.shape[0] == 0:
        raise EmptyForegroundError("empty foreground multiset")
    ids = nearest_palette_ids(lexicon, fg)
    uniq, counts = np.unique(ids, return_counts=True)
    return ColorHistogram(
        counts={int(c): int(n) for c, n in zip(uniq, counts)},
        total=int(fg.shape[0]),
    )


def top3(hist: ColorHistogram) -> OutfitTriple:
    """Three most frequent color ids, descending count, ties by lower id.

    Histograms with fewer than three distinct colors repeat the last entry.
    """
    if not hist.counts:
        raise ValueError("histogram has no colors")
    ranked = sorted(hist.counts.items(), key=lambda kv: (-kv[1], kv[0]))
    ids = [cid for cid, _ in ranked[:3]]
    padded = len(ids) < 3
    while len(ids) < 3:
        ids.append(ids[-1])
    return OutfitTriple(colors=tuple(ids), padded=padded)


def garment_histogram(img: GarmentImage, lexicon: CisLexicon,
                      eps_bg: float = 0.0) -> ColorHistogram:
    return quantize_histogram(lexicon, extract_foreground(img, eps_bg=eps_bg))


def outfit_concat_features(top: GarmentImage, bottom: GarmentImage,
                           lexicon: CisLexicon, eps_bg: float = 0.0) -> ColorHistogram:
    """Histogram over the union of both garments' foregrounds.

    Equivalent to quantizing a physically concatenated image, without the
    resampling a literal stitch would need.
    """
    return garment_histogram(top, lexicon, eps_bg).add(
        garment_histogram(bottom, lexicon, eps_bg)
    )


def read_manifest(path):
    """Yield records from a JSON-lines manifest file."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {exc}") from exc


def write_manifest(records, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec) + "\n")
