import numpy as np
import pytest

from stylerec.lexicon import (
    CisColor,
    CisLexicon,
    CisTriplet,
    StylePattern,
    load_desk_lexicon,
)
from stylerec.preprocess import GarmentImage


@pytest.fixture(scope="session")
def desk_lexicon():
    return load_desk_lexicon()


@pytest.fixture
def tiny_lexicon():
    """6 colors, 4 triplets, 2 patterns; RGB space."""
    palette = [
        CisColor(id=0, rgb=(0, 0, 0)),
        CisColor(id=1, rgb=(255, 255, 255)),
        CisColor(id=2, rgb=(255, 0, 0)),
        CisColor(id=3, rgb=(0, 255, 0)),
        CisColor(id=4, rgb=(0, 0, 255)),
        CisColor(id=5, rgb=(128, 128, 0)),
    ]
    patterns = [
        StylePattern(id=0, name="alpha", warm_cool=-0.5, soft_hard=0.2),
        StylePattern(id=1, name="beta", warm_cool=0.7, soft_hard=-0.3),
    ]
    triplets = [
        CisTriplet(color_ids=(0, 1, 2), adjective="stark", pattern_id=0),
        CisTriplet(color_ids=(2, 3, 4), adjective="primary", pattern_id=1),
        CisTriplet(color_ids=(1, 5, 3), adjective="mossy", pattern_id=0),
        CisTriplet(color_ids=(4, 4, 5), adjective="murky", pattern_id=1),
    ]
    return CisLexicon(palette=palette, triplets=triplets, patterns=patterns)


def image_of_colors(rgb_counts, source_id="img", width=None):
    """Build a GarmentImage from a list of (rgb, count) pairs."""
    pixels = []
    for rgb, count in rgb_counts:
        pixels.extend([rgb] * count)
    n = len(pixels)
    width = width or n
    height = (n + width - 1) // width
    pad = width * height - n
    pixels.extend([pixels[-1]] * pad)
    arr = np.array(pixels, dtype=np.uint8).reshape(height, width, 3)
    mask = np.ones((height, width), dtype=bool)
    if pad:
        flat = mask.reshape(-1)
        flat[n:] = False
        mask = flat.reshape(height, width)
    return GarmentImage(pixels=arr, mask=mask, source_id=source_id)
