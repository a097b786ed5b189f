"""Style- and event-conditioned outfit recommendation engine."""

from .lexicon import (
    CisColor,
    CisLexicon,
    CisTriplet,
    StylePattern,
    load_lexicon,
    make_synthetic_lexicon,
    nearest_palette_color,
    save_lexicon,
)
from .preprocess import (
    ColorHistogram,
    EmptyForegroundError,
    GarmentImage,
    OutfitTriple,
    extract_foreground,
    outfit_concat_features,
    quantize_histogram,
    top3,
)
from .style import StyleClassifierConfig, StyleMatch, classify_style, style_distance
from .knn import LabeledFeatureSet, NearestNeighborClassifier, knn_classify
from .events import (
    Detection,
    EventCategory,
    classify_event,
    composite_garment,
    filter_detections,
)
from .memory import (
    Condition,
    MemoryEntry,
    MemoryRecommender,
    MemoryStore,
    RankedRecommendation,
    build_memory,
    recommend,
    recommend_conditioned,
    write,
)
from .metrics import (
    LabelDistribution,
    accuracy_at_k,
    category_color_accuracy,
    mean_average_precision,
    random_baseline,
    recommendation_entropy,
    shannon_entropy,
)
from .experiment import EvalReport, run_experiment

__version__ = "0.1.0"
