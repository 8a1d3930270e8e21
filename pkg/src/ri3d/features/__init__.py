"""Group feature extractors.

An extractor exposes ``name``, ``dim`` and ``extract(group)``; anything with
that surface can back a memory bank.
"""

import numpy as np

from ri3d.errors import ShapeError
from ri3d.features.baseline import DIM as BASELINE_DIM
from ri3d.features.baseline import baseline_descriptor
from ri3d.features.ctfnet import CtfNetParams, ctfnet_forward, init_weights, load_weights, save_weights


class CtfNetExtractor:
    name = "ctfnet"
    dim = 1024

    def __init__(self, params: CtfNetParams):
        self.params = params

    def extract(self, group) -> np.ndarray:
        return ctfnet_forward(group.local_points, self.params)


class BaselineExtractor:
    name = "baseline"
    dim = BASELINE_DIM

    def extract(self, group) -> np.ndarray:
        return baseline_descriptor(group.local_points)


def extract_all(extractor, groups) -> np.ndarray:
    """Stack one descriptor per group into a ``(len(groups), dim)`` float32 array."""
    out = np.empty((len(groups), extractor.dim), dtype=np.float32)
    for i, g in enumerate(groups):
        f = extractor.extract(g)
        if f.shape != (extractor.dim,):
            raise ShapeError(f"{extractor.name} returned shape {f.shape}, declared dim {extractor.dim}")
        out[i] = f
    return out


def make_extractor(name: str, weights=None, seed: int = 0):
    if name == "ctfnet":
        params = load_weights(weights) if weights else init_weights(seed)
        return CtfNetExtractor(params)
    if name == "baseline":
        return BaselineExtractor()
    raise ValueError(f"unknown extractor {name!r} (expected 'ctfnet' or 'baseline')")


__all__ = [
    "BaselineExtractor",
    "CtfNetExtractor",
    "CtfNetParams",
    "baseline_descriptor",
    "extract_all",
    "init_weights",
    "load_weights",
    "make_extractor",
    "save_weights",
]
