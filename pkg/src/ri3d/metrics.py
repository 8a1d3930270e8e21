"""Threshold-free evaluation: AUROC and area under the per-region-overlap curve."""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
from scipy.stats import rankdata

from ri3d.errors import UndefinedMetric

DEFAULT_FPR_CAP = 0.3
REGION_RULE = "explicit region ids, else connected components of anomalous points within 2x median NN spacing"
O_AUPRO_RULE = "partial ROC area up to fpr_cap, normalized (each anomalous object is its own region)"


def _check_labels(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(np.int64)
    if scores.shape != labels.shape or scores.ndim != 1 or len(scores) == 0:
        raise ValueError(f"scores {scores.shape} and labels {labels.shape} must be equal-length 1-D")
    if not np.isin(labels, (0, 1)).all():
        raise ValueError("labels must be 0 (normal) or 1 (anomalous)")
    return scores, labels


def auroc(scores, labels) -> float:
    """Mann-Whitney AUROC with tie-averaged ranks."""
    scores, labels = _check_labels(scores, labels)
    n1 = int(labels.sum())
    n0 = len(labels) - n1
    if n1 == 0 or n0 == 0:
        raise UndefinedMetric("AUROC needs at least one normal and one anomalous score")
    ranks = rankdata(scores, method="average")
    u = ranks[labels == 1].sum() - n1 * (n1 + 1) / 2.0
    return float(u / (n1 * n0))


def regions_from_labels(points, labels, region_ids=None) -> list[np.ndarray]:
    """Split the anomalous points of one sample into regions (index arrays, sorted by first index).

    Explicit positive ``region_ids`` take precedence; otherwise anomalous points
    are linked when closer than twice the sample's median nearest-neighbour
    spacing and each connected component is a region.
    """
    labels = np.asarray(labels).astype(np.int64)
    anomalous = np.flatnonzero(labels == 1)
    if len(anomalous) == 0:
        return []
    if region_ids is not None and np.any(np.asarray(region_ids) > 0):
        ids = np.asarray(region_ids)[anomalous]
        regions = [anomalous[ids == r] for r in np.unique(ids)]
        return sorted(regions, key=lambda r: int(r[0]))

    pts = np.asarray(points, dtype=np.float64)
    if len(pts) < 2:
        return [anomalous]
    nn_dist, _ = cKDTree(pts).query(pts, k=2)
    radius = 2.0 * float(np.median(nn_dist[:, 1]))
    pairs = cKDTree(pts[anomalous]).query_pairs(radius, output_type="ndarray")
    m = len(anomalous)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    _, comp = connected_components(graph, directed=False)
    regions = [anomalous[comp == c] for c in np.unique(comp)]
    return sorted(regions, key=lambda r: int(r[0]))


def _count_at_least(sorted_values: np.ndarray, thresholds: np.ndarray) -> np.ndarray:
    return len(sorted_values) - np.searchsorted(sorted_values, thresholds, side="left")


def pro_curve(samples) -> tuple[np.ndarray, np.ndarray]:
    """FPR and PRO at every distinct threshold, descending, starting from (0, 0).

    ``samples`` holds ``(scores, regions, normal_mask)`` triples. False
    positives are pooled over the normal points of all samples; PRO is the
    mean over all regions of the fraction of the region at or above threshold.
    """
    normal_scores, region_scores, all_scores = [], [], []
    for scores, regions, normal_mask in samples:
        scores = np.asarray(scores, dtype=np.float64)
        all_scores.append(scores)
        normal_scores.append(scores[np.asarray(normal_mask, dtype=bool)])
        region_scores.extend(np.sort(scores[np.asarray(r)]) for r in regions)
    if not region_scores:
        raise UndefinedMetric("AUPRO needs at least one anomalous region")
    normals = np.sort(np.concatenate(normal_scores))
    if len(normals) == 0:
        raise UndefinedMetric("AUPRO needs at least one normal point")

    thresholds = np.unique(np.concatenate(all_scores))[::-1]
    fpr = _count_at_least(normals, thresholds) / len(normals)
    overlap = np.zeros(len(thresholds))
    for r in region_scores:
        overlap += _count_at_least(r, thresholds) / len(r)
    pro = overlap / len(region_scores)
    return np.concatenate([[0.0], fpr]), np.concatenate([[0.0], pro])


def integrate_capped(x: np.ndarray, y: np.ndarray, cap: float) -> float:
    """Trapezoid area under a curve with non-decreasing ``x`` from 0 to ``cap``, divided by ``cap``."""
    if not 0 < cap <= 1:
        raise ValueError(f"fpr_cap must lie in (0, 1], got {cap}")
    keep = np.flatnonzero(x <= cap)
    xs, ys = x[keep], y[keep]
    last = keep[-1]
    if xs[-1] < cap and last + 1 < len(x):
        x0, x1, y0, y1 = x[last], x[last + 1], y[last], y[last + 1]
        xs = np.append(xs, cap)
        ys = np.append(ys, y0 + (y1 - y0) * (cap - x0) / (x1 - x0))
    return float(np.sum((xs[1:] - xs[:-1]) * (ys[1:] + ys[:-1]) / 2.0) / cap)


def aupro(samples, fpr_cap: float = DEFAULT_FPR_CAP) -> float:
    fpr, pro = pro_curve(samples)
    return integrate_capped(fpr, pro, fpr_cap)


def object_aupro(scores, labels, fpr_cap: float = DEFAULT_FPR_CAP) -> float:
    """Partial ROC area to ``fpr_cap``, normalized; each anomalous object is a singleton region."""
    scores, labels = _check_labels(scores, labels)
    regions = [np.array([i]) for i in np.flatnonzero(labels == 1)]
    return aupro([(scores, regions, labels == 0)], fpr_cap)


@dataclass
class SampleResult:
    name: str
    per_point_scores: np.ndarray
    object_score: float
    labels: np.ndarray
    regions: list = field(default_factory=list)

    @property
    def is_anomalous(self) -> bool:
        return bool(np.any(self.labels == 1))


@dataclass
class MetricReport:
    p_auroc: float | None
    o_auroc: float | None
    p_aupro: float | None
    o_aupro: float | None
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "P-AUROC": self.p_auroc,
            "O-AUROC": self.o_auroc,
            "P-AUPRO": self.p_aupro,
            "O-AUPRO": self.o_aupro,
            "config": self.config,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _or_none(fn, *args):
    try:
        return fn(*args)
    except UndefinedMetric:
        return None


def evaluate(results: list[SampleResult], fpr_cap: float = DEFAULT_FPR_CAP, config: dict | None = None) -> MetricReport:
    """Pixel metrics pool all points of all samples; object metrics use one score per sample.

    Metrics that are undefined for the given labels (e.g. an all-normal test
    split) are reported as ``None``.
    """
    for r in results:
        if len(r.per_point_scores) != len(r.labels):
            raise ValueError(f"{r.name}: {len(r.per_point_scores)} scores but {len(r.labels)} labels")
    echo = dict(config or {})
    echo.update(fpr_cap=fpr_cap, region_rule=REGION_RULE, o_aupro_rule=O_AUPRO_RULE)
    point_scores = np.concatenate([r.per_point_scores for r in results])
    point_labels = np.concatenate([r.labels for r in results])
    obj_scores = np.array([r.object_score for r in results])
    obj_labels = np.array([int(r.is_anomalous) for r in results])
    pro_samples = [(r.per_point_scores, r.regions, r.labels == 0) for r in results]
    return MetricReport(
        p_auroc=_or_none(auroc, point_scores, point_labels),
        o_auroc=_or_none(auroc, obj_scores, obj_labels),
        p_aupro=_or_none(aupro, pro_samples, fpr_cap),
        o_aupro=_or_none(object_aupro, obj_scores, obj_labels, fpr_cap),
        config=echo,
    )
