"""Synthetic defect dataset generator.

Each category samples its base surface once; every file of the category is
that base with optional Gaussian jitter, at most one surface defect, a random
rigid motion and a shuffled point order. Each file draws from its own
SplitMix64 stream, so the whole dataset is a pure function of ``(seed, spec)``.

Jitter defaults to zero: FPS and KNN selections are discontinuous in the
coordinates, so even 1e-4 jitter re-draws most groups and normal samples start
scoring like defective ones.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ri3d.io import CategoryLayout, DatasetLayout, GroundTruth, format_labels, write_cloud
from ri3d.rng import RngStream, partial_fisher_yates

SHAPES = ("sphere", "cube")
DEFECTS = ("bump", "dent", "crater")


@dataclass(frozen=True)
class SyntheticSpec:
    categories: tuple = ("cube",)
    n_train: int = 4
    n_test_normal: int = 5
    n_test_defect: int = 5
    n_points: int = 2048
    defects: tuple = DEFECTS
    bump_height: float = 0.08
    bump_radius: float = 0.2
    crater_radius: float = 0.15
    max_translation: float = 2.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        for shape in self.categories:
            if shape not in SHAPES:
                raise ValueError(f"unknown shape {shape!r}; expected one of {SHAPES}")
        for d in self.defects:
            if d not in DEFECTS:
                raise ValueError(f"unknown defect {d!r}; expected one of {DEFECTS}")
        if self.n_points < 16:
            raise ValueError("n_points must be at least 16")

    @classmethod
    def from_dict(cls, data: dict) -> "SyntheticSpec":
        data = dict(data)
        for key in ("categories", "defects"):
            if key in data:
                data[key] = tuple(data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


@dataclass
class SyntheticSample:
    points: np.ndarray
    labels: np.ndarray
    region_ids: np.ndarray
    defect: str | None = None
    meta: dict = field(default_factory=dict)


def _sample_sphere(rng: RngStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    g = rng.gaussian_array(3 * n).reshape(n, 3)
    pts = g / np.linalg.norm(g, axis=1, keepdims=True)
    return pts, pts.copy()


_CUBE_FACES = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]], dtype=np.float64)


def _sample_cube(rng: RngStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    u = rng.uniform_array(3 * n).reshape(n, 3)
    face = np.minimum((u[:, 0] * 6).astype(np.int64), 5)
    normals = _CUBE_FACES[face]
    axis = face // 2
    a, b = u[:, 1] - 0.5, u[:, 2] - 0.5
    pts = np.empty((n, 3))
    for k in range(3):
        sel = axis == k
        others = [j for j in range(3) if j != k]
        pts[sel, k] = 0.5 * normals[sel, k]
        pts[sel, others[0]] = a[sel]
        pts[sel, others[1]] = b[sel]
    return pts, normals


def random_rotation(rng: RngStream) -> np.ndarray:
    """Uniform SO(3) sample from a normalized Gaussian quaternion."""
    w, x, y, z = rng.gaussian_array(4)
    s = math.sqrt(w * w + x * x + y * y + z * z)
    w, x, y, z = w / s, x / s, y / s, z / s
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def _apply_defect(kind, pts, normals, rng, spec):
    n = len(pts)
    center_idx = min(int(rng.uniform() * n), n - 1)
    center = pts[center_idx]
    direction = normals[center_idx]
    d = np.linalg.norm(pts - center, axis=1)
    labels = np.zeros(n, dtype=np.int64)
    keep = np.ones(n, dtype=bool)
    h, r = spec.bump_height, spec.bump_radius

    if kind in ("bump", "dent"):
        sign = 1.0 if kind == "bump" else -1.0
        inside = d <= 2.0 * r
        push = sign * h * np.exp(-0.5 * (d / r) ** 2)
        pts = pts + np.where(inside, push, 0.0)[:, None] * direction
        labels[inside] = 1
    else:
        rc = spec.crater_radius
        keep = d >= rc
        rim = keep & (d <= rc + r)
        lift = h * np.exp(-0.5 * ((d - rc) / (r / 2.0)) ** 2)
        pts = pts + np.where(rim, lift, 0.0)[:, None] * direction
        labels[rim] = 1
    return pts[keep], labels[keep], {"defect_center": center.tolist()}


def sample_base_shape(shape: str, rng: RngStream, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Surface points and their outward normals, in the shape's local frame."""
    sampler = _sample_sphere if shape == "sphere" else _sample_cube
    return sampler(rng, n)


def generate_sample(base: tuple[np.ndarray, np.ndarray], rng: RngStream, spec: SyntheticSpec,
                    defect: str | None = None) -> SyntheticSample:
    """One file: jitter the shared base points, optionally add a defect, then move rigidly."""
    pts, normals = base
    pts = pts + spec.noise_sigma * rng.gaussian_array(pts.size).reshape(pts.shape)
    labels = np.zeros(len(pts), dtype=np.int64)
    meta = {}
    if defect is not None:
        pts, labels, meta = _apply_defect(defect, pts, normals, rng, spec)
    rot = random_rotation(rng)
    shift = (2.0 * rng.uniform_array(3) - 1.0) * spec.max_translation
    order = partial_fisher_yates(len(pts), len(pts), rng)
    moved = pts[order] @ rot.T + shift
    labels = labels[order]
    meta.update(rotation=rot.tolist(), translation=shift.tolist())
    return SyntheticSample(points=moved, labels=labels, region_ids=labels.copy(), defect=defect, meta=meta)



def gen_synthetic(seed: int, spec: SyntheticSpec, out_dir) -> DatasetLayout:
    """Write ``out_dir/<category>/{train,test,gt}`` and a ``synthetic.json`` manifest."""
    out_dir = Path(out_dir)
    file_index = 0
    categories = {}
    manifest = {"seed": seed, "spec": spec.to_dict(), "files": []}

    def next_rng():
        nonlocal file_index
        rng = RngStream.for_sample(seed, file_index)
        file_index += 1
        return rng

    for cat_i, shape in enumerate(spec.categories):
        name = f"{shape}{cat_i}" if spec.categories.count(shape) > 1 else shape
        root = out_dir / name
        for sub in ("train", "test", "gt"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        train, test, gt = [], [], {}
        base = sample_base_shape(shape, next_rng(), spec.n_points)

        for i in range(spec.n_train):
            sample = generate_sample(base, next_rng(), spec)
            path = root / "train" / f"{i:03d}.xyz"
            write_cloud(sample.points, path)
            train.append(path)
            manifest["files"].append({"path": str(path.relative_to(out_dir)), "defect": None})

        jobs = [("good", None)] * spec.n_test_normal
        jobs += [(spec.defects[j % len(spec.defects)],) * 2 for j in range(spec.n_test_defect)]
        counters = {}
        for prefix, defect in jobs:
            k = counters.get(prefix, 0)
            counters[prefix] = k + 1
            sample = generate_sample(base, next_rng(), spec, defect=defect)
            stem = f"{prefix}_{k:03d}"
            path = root / "test" / f"{stem}.xyz"
            write_cloud(sample.points, path)
            gt_path = root / "gt" / f"{stem}.txt"
            region_ids = sample.region_ids if defect is not None else None
            gt_path.write_text(format_labels(GroundTruth(sample.labels, region_ids)), encoding="utf-8")
            test.append(path)
            gt[stem] = gt_path
            manifest["files"].append({
                "path": str(path.relative_to(out_dir)),
                "defect": defect,
                "anomalous_points": int(sample.labels.sum()),
                "n_points": len(sample.points),
            })
        categories[name] = CategoryLayout(name, train, sorted(test), gt)

    (out_dir / "synthetic.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return DatasetLayout(root=out_dir, categories=categories)
