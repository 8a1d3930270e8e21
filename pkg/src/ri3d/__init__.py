"""Rotation-invariant point-cloud anomaly detection.

Canonicalize clouds into a data-derived frame, split them into FPS/KNN groups,
describe each group with a feature extractor, and score test groups by the
distance to their nearest neighbour in a memory bank of normal features.
"""

from ri3d.errors import (
    DegenerateCloud,
    EmptyCloud,
    NumericallyDegenerate,
    ParseError,
    ShapeError,
    UndefinedMetric,
    UnsupportedFormat,
)
from ri3d.geometry import CanonicalFrame, KeyVectors, MappedCloud, centroid, gram_schmidt, pcm_map, select_key_vectors
from ri3d.sampling import Group, fps, knn_group

__version__ = "0.1.0"

__all__ = [
    "CanonicalFrame",
    "DegenerateCloud",
    "EmptyCloud",
    "Group",
    "KeyVectors",
    "MappedCloud",
    "NumericallyDegenerate",
    "ParseError",
    "ShapeError",
    "UndefinedMetric",
    "UnsupportedFormat",
    "centroid",
    "fps",
    "gram_schmidt",
    "knn_group",
    "pcm_map",
    "select_key_vectors",
]
