"""Farthest point sampling and k-nearest-neighbour grouping on mapped clouds.

Both selections are decided purely by coordinates (ties broken by the
lexicographic coordinate tuple, then by index), so composing them after
``pcm_map`` keeps them invariant to rigid motions of the raw input.
"""

import time
from dataclasses import dataclass

import numpy as np

from ri3d.geometry import MappedCloud, as_cloud


@dataclass(frozen=True)
class Group:
    center_index: int
    member_indices: np.ndarray  # ascending distance to the center, center first
    local_points: np.ndarray  # members minus center, float64

    @property
    def size(self) -> int:
        return len(self.member_indices)


def _coords(points) -> np.ndarray:
    if isinstance(points, MappedCloud):
        return points.cloud
    return as_cloud(points)


def _sq_dist(pts: np.ndarray, p: np.ndarray) -> np.ndarray:
    diff = pts - p
    return np.einsum("ij,ij->i", diff, diff)


def _argmax_tiebreak(values: np.ndarray, pts: np.ndarray) -> int:
    cand = np.flatnonzero(values == values.max())
    if len(cand) == 1:
        return int(cand[0])
    c = pts[cand]
    order = np.lexsort((cand, c[:, 2], c[:, 1], c[:, 0]))
    return int(cand[order[0]])


def fps(points, count: int) -> np.ndarray:
    """Greedy max-min sampling of ``min(count, n)`` center indices.

    The seed is the point farthest from the origin, which after ``pcm_map``
    is the centroid, so the result does not depend on input point order.
    """
    if count < 1:
        raise ValueError(f"group count must be >= 1, got {count}")
    pts = _coords(points)
    n = len(pts)
    m = min(count, n)

    chosen = np.empty(m, dtype=np.int64)
    chosen[0] = _argmax_tiebreak(np.einsum("ij,ij->i", pts, pts), pts)
    mind = _sq_dist(pts, pts[chosen[0]])
    mind[chosen[0]] = -1.0
    for k in range(1, m):
        nxt = _argmax_tiebreak(mind, pts)
        chosen[k] = nxt
        np.minimum(mind, _sq_dist(pts, pts[nxt]), out=mind)
        mind[chosen[:k + 1]] = -1.0
    return chosen


def knn_group(points, center_index: int, k: int) -> Group:
    if k < 1:
        raise ValueError(f"group size must be >= 1, got {k}")
    pts = _coords(points)
    n = len(pts)
    if not 0 <= center_index < n:
        raise IndexError(f"center index {center_index} out of range for {n} points")
    center = pts[center_index]
    d2 = _sq_dist(pts, center)
    idx = np.arange(n)
    not_center = idx != center_index
    order = np.lexsort((idx, pts[:, 2], pts[:, 1], pts[:, 0], not_center, d2))
    members = order[:min(k, n)]
    return Group(center_index=int(center_index), member_indices=members,
                 local_points=pts[members] - center)


def extract_groups(points, count: int, k: int, timings: dict | None = None) -> tuple[np.ndarray, list[Group]]:
    """FPS centers followed by one KNN group per center, in center order."""
    pts = _coords(points)
    t0 = time.perf_counter()
    centers = fps(pts, count)
    t1 = time.perf_counter()
    groups = [knn_group(pts, int(c), k) for c in centers]
    if timings is not None:
        timings["fps"] = timings.get("fps", 0.0) + (t1 - t0)
        timings["knn"] = timings.get("knn", 0.0) + (time.perf_counter() - t1)
    return centers, groups


def nearest_center(points, centers: np.ndarray) -> np.ndarray:
    """Position (into ``centers``) of the nearest center for every point; ties go to the earlier center."""
    pts = _coords(points)
    best = np.full(len(pts), np.inf)
    which = np.zeros(len(pts), dtype=np.int64)
    for j, c in enumerate(centers):
        d2 = _sq_dist(pts, pts[c])
        closer = d2 < best
        best[closer] = d2[closer]
        which[closer] = j
    return which
