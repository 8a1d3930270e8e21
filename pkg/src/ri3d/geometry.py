"""Point coordinate mapping: centroid, key vectors, Gram-Schmidt frame, rigid transform.

A cloud is an ``(n, 3)`` float64 array. The mapping expresses every point in a
frame built from the cloud itself, so the output does not depend on how the
input was rotated or translated.
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ri3d.errors import DegenerateCloud, EmptyCloud, NumericallyDegenerate, ShapeError

RANK_TOL = 1e-9

_BRUTE_DIAMETER_MAX = 512
_CHUNK = 256


def as_cloud(points) -> np.ndarray:
    """Validate and convert ``points`` to a contiguous ``(n, 3)`` float64 array."""
    arr = np.ascontiguousarray(points, dtype=np.float64)
    if arr.ndim == 1 and arr.size == 0:
        arr = arr.reshape(0, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ShapeError(f"expected an (n, 3) array, got shape {arr.shape}")
    if arr.shape[0] == 0:
        raise EmptyCloud("point cloud has no points")
    if not np.all(np.isfinite(arr)):
        raise ShapeError("point cloud contains NaN or Inf coordinates")
    return arr


@dataclass(frozen=True)
class KeyVectors:
    u1: np.ndarray
    u2: np.ndarray
    u3: np.ndarray
    idx1: int
    idx2: int
    idx3: int

    def matrix(self) -> np.ndarray:
        return np.stack([self.u1, self.u2, self.u3])


@dataclass(frozen=True)
class CanonicalFrame:
    centroid: np.ndarray
    basis: np.ndarray  # rows e1, e2, e3

    @property
    def determinant(self) -> float:
        return float(np.linalg.det(self.basis))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.centroid) @ self.basis.T


@dataclass(frozen=True)
class MappedCloud:
    cloud: np.ndarray
    frame: CanonicalFrame
    key: KeyVectors

    @property
    def n(self) -> int:
        return self.cloud.shape[0]


def centroid(points) -> np.ndarray:
    return as_cloud(points).mean(axis=0)


def _max_pairwise(points: np.ndarray) -> float:
    best = 0.0
    sq = np.einsum("ij,ij->i", points, points)
    for start in range(0, len(points), _CHUNK):
        block = points[start:start + _CHUNK]
        d2 = sq[start:start + _CHUNK, None] + sq[None, :] - 2.0 * block @ points.T
        best = max(best, float(d2.max()))
    return float(np.sqrt(max(best, 0.0)))


def diameter(points) -> float:
    """Largest pairwise distance. Hull vertices are used to prune large clouds."""
    pts = as_cloud(points)
    if len(pts) > _BRUTE_DIAMETER_MAX:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except (QhullError, ValueError):
            pass
    return _max_pairwise(pts)


def _descending_order(dist: np.ndarray) -> np.ndarray:
    # ties: lowest input index first
    return np.lexsort((np.arange(len(dist)), -dist))


def _ascending_order(dist: np.ndarray) -> np.ndarray:
    return np.lexsort((np.arange(len(dist)), dist))


def select_key_vectors(points, c=None, tol: float | None = None) -> KeyVectors:
    """Pick the farthest, second-farthest independent and nearest independent displacements.

    ``tol`` is the absolute residual-norm threshold for linear independence; it
    defaults to ``RANK_TOL * diameter(points)``.
    """
    pts = as_cloud(points)
    n = len(pts)
    if n < 3:
        raise DegenerateCloud(f"need at least 3 points, got {n}")
    c = pts.mean(axis=0) if c is None else np.asarray(c, dtype=np.float64)
    if tol is None:
        tol = RANK_TOL * diameter(pts)

    rel = pts - c
    dist = np.sqrt(np.einsum("ij,ij->i", rel, rel))
    desc = _descending_order(dist)

    idx1 = int(desc[0])
    u1 = rel[idx1]
    norm1 = dist[idx1]
    if not norm1 > tol:
        raise DegenerateCloud("all points coincide with the centroid")
    e1 = u1 / norm1

    res2 = rel - np.outer(rel @ e1, e1)
    ok2 = np.sqrt(np.einsum("ij,ij->i", res2, res2))[desc] > tol
    ok2[0] = False
    if not ok2.any():
        raise DegenerateCloud("points are collinear: no second independent vector")
    idx2 = int(desc[np.argmax(ok2)])
    v2 = res2[idx2]
    e2 = v2 / np.linalg.norm(v2)

    asc = _ascending_order(dist)
    res3 = res2 - np.outer(rel @ e2, e2)
    ok3 = np.sqrt(np.einsum("ij,ij->i", res3, res3))[asc] > tol
    ok3[(asc == idx1) | (asc == idx2)] = False
    if not ok3.any():
        raise DegenerateCloud("points are coplanar: no third independent vector")
    idx3 = int(asc[np.argmax(ok3)])

    return KeyVectors(u1=u1.copy(), u2=rel[idx2].copy(), u3=rel[idx3].copy(),
                      idx1=idx1, idx2=idx2, idx3=idx3)


def gram_schmidt(u1, u2=None, u3=None, tol: float | None = None) -> np.ndarray:
    """Classical Gram-Schmidt on three vectors; returns the basis as rows.

    Accepts either a ``KeyVectors`` instance or three vectors. Raises
    ``NumericallyDegenerate`` when an intermediate residual norm is not above
    ``tol`` (default ``RANK_TOL`` times the largest input norm).
    """
    if isinstance(u1, KeyVectors):
        u1, u2, u3 = u1.u1, u1.u2, u1.u3
    u1, u2, u3 = (np.asarray(v, dtype=np.float64) for v in (u1, u2, u3))
    if tol is None:
        tol = RANK_TOL * max(np.linalg.norm(u1), np.linalg.norm(u2), np.linalg.norm(u3))

    n1 = np.linalg.norm(u1)
    if not n1 > tol:
        raise NumericallyDegenerate(f"|u1| = {n1:g} is not above tolerance {tol:g}")
    e1 = u1 / n1
    v2 = u2 - (u2 @ e1) * e1
    n2 = np.linalg.norm(v2)
    if not n2 > tol:
        raise NumericallyDegenerate(f"u2 residual {n2:g} is not above tolerance {tol:g}")
    e2 = v2 / n2
    v3 = u3 - (u3 @ e1) * e1 - (u3 @ e2) * e2
    n3 = np.linalg.norm(v3)
    if not n3 > tol:
        raise NumericallyDegenerate(f"u3 residual {n3:g} is not above tolerance {tol:g}")
    e3 = v3 / n3
    return np.stack([e1, e2, e3])


def canonical_frame(points) -> tuple[CanonicalFrame, KeyVectors]:
    pts = as_cloud(points)
    c = pts.mean(axis=0)
    tol = RANK_TOL * diameter(pts)
    key = select_key_vectors(pts, c, tol=tol)
    basis = gram_schmidt(key, tol=tol)
    return CanonicalFrame(centroid=c, basis=basis), key


def pcm_map(points) -> MappedCloud:
    """Map a cloud into its own canonical frame: ``p* = (p - c) @ basis.T``.

    Point order is preserved. Raises ``DegenerateCloud`` for collinear or
    coplanar input rather than inventing a fallback frame.
    """
    pts = as_cloud(points)
    frame, key = canonical_frame(pts)
    return MappedCloud(cloud=frame.apply(pts), frame=frame, key=key)
