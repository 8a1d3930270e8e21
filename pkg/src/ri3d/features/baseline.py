"""Dependency-free handcrafted group descriptor (33 values).

Layout: 3 covariance eigenvalues (descending), mean and std of the member
distances to the center, a 16-bin distance histogram over ``[0, max]`` and a
12-bin elevation histogram ``asin(z / r)`` over ``[-pi/2, pi/2]``. Everything
after the eigenvalues excludes the center point itself.
"""

import numpy as np

DIST_BINS = 16
ELEV_BINS = 12
DIM = 3 + 2 + DIST_BINS + ELEV_BINS


def _histogram(values: np.ndarray, lo: float, hi: float, bins: int) -> np.ndarray:
    hist = np.zeros(bins)
    if len(values) == 0:
        return hist
    if hi > lo:
        idx = np.floor((values - lo) / (hi - lo) * bins).astype(np.int64)
    else:
        idx = np.zeros(len(values), dtype=np.int64)
    np.add.at(hist, np.clip(idx, 0, bins - 1), 1.0)
    return hist / len(values)


def baseline_descriptor(local_points: np.ndarray) -> np.ndarray:
    pts = np.asarray(local_points, dtype=np.float64)
    cov = np.cov(pts.T, bias=True) if len(pts) > 1 else np.zeros((3, 3))
    eig = np.sort(np.clip(np.linalg.eigvalsh(cov), 0.0, None))[::-1]

    rest = pts[1:]
    r = np.sqrt(np.einsum("ij,ij->i", rest, rest))
    stats = np.array([r.mean(), r.std()]) if len(r) else np.zeros(2)
    dist_hist = _histogram(r, 0.0, float(r.max()) if len(r) else 0.0, DIST_BINS)

    with np.errstate(invalid="ignore", divide="ignore"):
        elev = np.where(r > 0, np.arcsin(np.clip(rest[:, 2] / r, -1.0, 1.0)), 0.0)
    elev_hist = _histogram(elev, -np.pi / 2, np.pi / 2, ELEV_BINS)

    return np.concatenate([eig, stats, dist_hist, elev_hist]).astype(np.float32)
