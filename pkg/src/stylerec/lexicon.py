"""Color lexicon: palette colors, adjective triplets and style patterns.

The lexicon is loaded from a versioned JSON file (``cis_version: 1``) and is
immutable after load, so it can be shared freely across threads. Nearest-color
lookups run in either raw RGB or CIELAB depending on the lexicon's
``color_space`` field.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

LEXICON_VERSION = 1


class LexiconParseError(ValueError):
    """Raised when a lexicon file is malformed."""


class LexiconIntegrityError(ValueError):
    """Raised when a lexicon violates referential integrity."""


@dataclass(frozen=True)
class CisColor:
    id: int
    rgb: tuple[int, int, int]
    name: str | None = None


@dataclass(frozen=True)
class CisTriplet:
    color_ids: tuple[int, int, int]
    adjective: str
    pattern_id: int


@dataclass(frozen=True)
class StylePattern:
    id: int
    name: str
    warm_cool: float
    soft_hard: float


def srgb_to_lab(rgb: np.ndarray) -> np.ndarray:
    """Convert an (..., 3) array of sRGB values in [0, 255] to CIELAB (D65)."""
    c = np.asarray(rgb, dtype=np.float64) / 255.0
    lin = np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)
    m = np.array(
        [
            [0.4124564, 0.3575761, 0.1804375],
            [0.2126729, 0.7151522, 0.0721750],
            [0.0193339, 0.1191920, 0.9503041],
        ]
    )
    xyz = lin @ m.T
    xyz /= np.array([0.95047, 1.0, 1.08883])
    f = np.where(xyz > 0.008856, np.cbrt(xyz), 7.787 * xyz + 16.0 / 116.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


@dataclass
class CisLexicon:
    """Immutable color vocabulary with O(1) id lookup and a cached palette matrix."""

    palette: list[CisColor]
    triplets: list[CisTriplet]
    patterns: list[StylePattern]
    color_space: str = "rgb"

    _color_by_id: dict[int, CisColor] = field(init=False, repr=False)
    _pattern_by_id: dict[int, StylePattern] = field(init=False, repr=False)
    _palette_ids: np.ndarray = field(init=False, repr=False)
    _palette_vectors: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.validate()
        # Ascending-id order makes argmin's first-occurrence rule equal the
        # lowest-id tie-break.
        ordered = sorted(self.palette, key=lambda c: c.id)
        self._color_by_id = {c.id: c for c in ordered}
        self._pattern_by_id = {p.id: p for p in self.patterns}
        self._palette_ids = np.array([c.id for c in ordered], dtype=np.int64)
        rgb = np.array([c.rgb for c in ordered], dtype=np.float64)
        self._palette_vectors = self.to_space(rgb)

    def validate(self):
        if self.color_space not in ("rgb", "lab"):
            raise LexiconIntegrityError(f"unknown color_space {self.color_space!r}")
        seen = set()
        for c in self.palette:
            if c.id in seen:
                raise LexiconIntegrityError(f"duplicate color id {c.id}")
            seen.add(c.id)
            if not all(0 <= ch <= 255 for ch in c.rgb):
                raise LexiconIntegrityError(f"color id {c.id} has channel out of [0,255]")
        pattern_names = set()
        pattern_ids = set()
        for p in self.patterns:
            if p.id in pattern_ids:
                raise LexiconIntegrityError(f"duplicate pattern id {p.id}")
            if p.name in pattern_names:
                raise LexiconIntegrityError(f"duplicate pattern name {p.name!r}")
            if not (np.isfinite(p.warm_cool) and np.isfinite(p.soft_hard)):
                raise LexiconIntegrityError(f"pattern id {p.id} has non-finite coordinates")
            pattern_ids.add(p.id)
            pattern_names.add(p.name)
        used_patterns = set()
        for i, t in enumerate(self.triplets):
            for cid in t.color_ids:
                if cid not in seen:
                    raise LexiconIntegrityError(
                        f"triplet {i} references unknown color id {cid}"
                    )
            if not t.adjective:
                raise LexiconIntegrityError(f"triplet {i} has an empty adjective")
            if t.pattern_id not in pattern_ids:
                raise LexiconIntegrityError(
                    f"triplet {i} references unknown pattern id {t.pattern_id}"
                )
            used_patterns.add(t.pattern_id)
        for p in self.patterns:
            if p.id not in used_patterns:
                raise LexiconIntegrityError(f"pattern id {p.id} ({p.name}) has no triplets")

    def to_space(self, rgb: np.ndarray) -> np.ndarray:
        """Map raw RGB values into the lexicon's configured color space."""
        rgb = np.asarray(rgb, dtype=np.float64)
        if self.color_space == "lab":
            return srgb_to_lab(rgb)
        return rgb

    def color(self, color_id: int) -> CisColor:
        return self._color_by_id[color_id]

    def pattern(self, pattern_id: int) -> StylePattern:
        return self._pattern_by_id[pattern_id]

    @property
    def palette_ids(self) -> np.ndarray:
        return self._palette_ids

    @property
    def palette_vectors(self) -> np.ndarray:
        """(n_colors, 3) matrix in the configured space, ascending color id."""
        return self._palette_vectors

    def color_vectors(self, color_ids) -> np.ndarray:
        """Stack the space-mapped vectors of the given color ids, in order."""
        idx = np.searchsorted(self._palette_ids, np.asarray(color_ids))
        return self._palette_vectors[idx]


def nearest_palette_ids(lexicon: CisLexicon, rgb: np.ndarray) -> np.ndarray:
    """Map an (n, 3) array of RGB values to nearest palette color ids.

    Ties resolve to the lowest color id.
    """
    q = lexicon.to_space(np.asarray(rgb, dtype=np.float64).reshape(-1, 3))
    d2 = ((q[:, None, :] - lexicon.palette_vectors[None, :, :]) ** 2).sum(axis=2)
    return lexicon.palette_ids[np.argmin(d2, axis=1)]


def nearest_palette_color(lexicon: CisLexicon, rgb) -> CisColor:
    """Return the palette color closest to ``rgb`` in the configured space."""
    if not lexicon.palette:
        raise LexiconIntegrityError("empty palette")
    (cid,) = nearest_palette_ids(lexicon, np.asarray(rgb).reshape(1, 3))
    return lexicon.color(int(cid))


def lexicon_from_dict(doc: dict) -> CisLexicon:
    try:
        if doc.get("cis_version") != LEXICON_VERSION:
            raise LexiconParseError(
                f"unsupported cis_version {doc.get('cis_version')!r}"
            )
        palette = [
            CisColor(id=int(c["id"]), rgb=tuple(int(v) for v in c["rgb"]),
                     name=c.get("name"))
            for c in doc["colors"]
        ]
        triplets = [
            CisTriplet(
                color_ids=tuple(int(v) for v in t["color_ids"]),
                adjective=str(t["adjective"]),
                pattern_id=int(t["pattern_id"]),
            )
            for t in doc["triplets"]
        ]
        patterns = [
            StylePattern(
                id=int(p["id"]), name=str(p["name"]),
                warm_cool=float(p["warm_cool"]), soft_hard=float(p["soft_hard"]),
            )
            for p in doc["patterns"]
        ]
        color_space = doc.get("color_space", "rgb")
    except LexiconParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise LexiconParseError(f"malformed lexicon document: {exc}") from exc
    return CisLexicon(palette=palette, triplets=triplets, patterns=patterns,
                      color_space=color_space)


def lexicon_to_dict(lex: CisLexicon) -> dict:
    return {
        "cis_version": LEXICON_VERSION,
        "color_space": lex.color_space,
        "colors": [
            {"id": c.id, "rgb": list(c.rgb), **({"name": c.name} if c.name else {})}
            for c in lex.palette
        ],
        "triplets": [
            {"color_ids": list(t.color_ids), "adjective": t.adjective,
             "pattern_id": t.pattern_id}
            for t in lex.triplets
        ],
        "patterns": [
            {"id": p.id, "name": p.name, "warm_cool": p.warm_cool,
             "soft_hard": p.soft_hard}
            for p in lex.patterns
        ],
    }


def load_lexicon(path) -> CisLexicon:
    """Load and validate a lexicon JSON file."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise LexiconParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise LexiconParseError(f"{path}: expected a JSON object at top level")
    return lexicon_from_dict(doc)


def save_lexicon(lex: CisLexicon, path):
    Path(path).write_text(json.dumps(lexicon_to_dict(lex), indent=2), encoding="utf-8")


def desk_lexicon_path() -> Path:
    """Path of the small lexicon shipped for tests and demos."""
    return Path(__file__).parent / "data" / "desk_lexicon.json"


def load_desk_lexicon() -> CisLexicon:
    return load_lexicon(desk_lexicon_path())


def make_synthetic_lexicon(
    n_colors: int,
    n_triplets: int,
    n_patterns: int,
    seed: int = 0,
    color_space: str = "rgb",
) -> CisLexicon:
    """Generate a random but valid lexicon of the requested size.

    Every pattern receives at least one triplet (round-robin assignment).
    """
    rng = np.random.default_rng(seed)
    if n_triplets < n_patterns:
        raise ValueError("need at least one triplet per pattern")
    # rejection-free unique colors: sample until distinct
    rgbs = set()
    while len(rgbs) < n_colors:
        rgbs.add(tuple(int(v) for v in rng.integers(0, 256, size=3)))
    palette = [CisColor(id=i, rgb=rgb) for i, rgb in enumerate(sorted(rgbs))]
    patterns = [
        StylePattern(id=i, name=f"pattern-{i:02d}",
                     warm_cool=float(rng.uniform(-1, 1)),
                     soft_hard=float(rng.uniform(-1, 1)))
        for i in range(n_patterns)
    ]
    triplets = []
    for j in range(n_triplets):
        ids = tuple(int(v) for v in rng.choice(n_colors, size=3, replace=True))
        triplets.append(
            CisTriplet(color_ids=ids, adjective=f"adj-{j:04d}",
                       pattern_id=j % n_patterns)
        )
    return CisLexicon(palette=palette, triplets=triplets, patterns=patterns,
                      color_space=color_space)
