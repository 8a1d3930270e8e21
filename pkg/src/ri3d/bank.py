"""Memory bank of normal group features and nearest-neighbour scoring."""

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ri3d.errors import DegenerateCloud, Ri3dError, ShapeError
from ri3d.features import extract_all, rifw
from ri3d.geometry import pcm_map
from ri3d.sampling import extract_groups, nearest_center

# Exact-search pruning margin, relative to |query|^2 + max|bank row|^2. The
# float64 error of the norm expansion is below ~2 * d * 2^-53 of that scale,
# many orders of magnitude under this margin for any realistic d.
_PRUNE_MARGIN = 1e-9
_QUERY_CHUNK = 256


@dataclass
class MemoryBank:
    vectors: np.ndarray  # (count, dim) float32
    sample_ids: list = field(default_factory=list)
    center_indices: np.ndarray = None

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ShapeError(f"bank vectors must be 2-D, got shape {self.vectors.shape}")
        if self.center_indices is None:
            self.center_indices = np.zeros(len(self.vectors), dtype=np.int64)
        self.center_indices = np.asarray(self.center_indices, dtype=np.int64)
        if not self.sample_ids:
            self.sample_ids = [""] * len(self.vectors)
        if len(self.sample_ids) != len(self.vectors) or len(self.center_indices) != len(self.vectors):
            raise ShapeError("bank provenance is not row-aligned with the vectors")
        self.vectors.setflags(write=False)
        self._sq = np.einsum("ij,ij->i", self.vectors.astype(np.float64), self.vectors.astype(np.float64))

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def nbytes_estimate(self) -> int:
        return self.count * self.dim * 4


@dataclass
class ScoreReport:
    center_indices: np.ndarray
    center_scores: np.ndarray  # float64
    per_point_scores: np.ndarray  # float64, one per input point
    object_score: float
    nn_indices: np.ndarray = None


def _exact_sq(bank: MemoryBank, query: np.ndarray, rows: np.ndarray) -> np.ndarray:
    diff = bank.vectors[rows].astype(np.float64) - query.astype(np.float64)
    return np.sum(diff * diff, axis=-1)


def nn_search(bank: MemoryBank, queries: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact L2 nearest neighbour for each query row; ties go to the lowest bank index.

    A float64 matmul expansion prunes candidates; the survivors are re-scored
    from explicit differences, so the answer equals a brute-force scan.
    """
    queries = np.asarray(queries, dtype=np.float32)
    if queries.ndim == 1:
        queries = queries[None]
    if bank.count == 0:
        raise ShapeError("memory bank is empty")
    if queries.shape[1] != bank.dim:
        raise ShapeError(f"query dim {queries.shape[1]} does not match bank dim {bank.dim}")

    bank64 = bank.vectors.astype(np.float64)
    max_sq = float(bank._sq.max())
    scores = np.empty(len(queries))
    index = np.empty(len(queries), dtype=np.int64)
    for start in range(0, len(queries), _QUERY_CHUNK):
        q = queries[start:start + _QUERY_CHUNK].astype(np.float64)
        q_sq = np.einsum("ij,ij->i", q, q)
        approx = q_sq[:, None] + bank._sq[None, :] - 2.0 * (q @ bank64.T)
        low = approx.min(axis=1)
        margin = _PRUNE_MARGIN * (q_sq + max_sq)
        for i in range(len(q)):
            cand = np.flatnonzero(approx[i] <= low[i] + margin[i])
            exact = _exact_sq(bank, queries[start + i], cand)
            j = int(np.argmin(exact))  # first minimum -> lowest bank index
            index[start + i] = cand[j]
            scores[start + i] = np.sqrt(exact[j])
    return scores, index


def nn_distance(bank: MemoryBank, f: np.ndarray) -> tuple[float, int]:
    scores, index = nn_search(bank, np.asarray(f)[None])
    return float(scores[0]), int(index[0])


@dataclass
class Featurized:
    mapped: object
    centers: np.ndarray
    features: np.ndarray


def featurize(points, extractor, G: int, K: int, timings: dict | None = None) -> Featurized:
    """pcm_map -> fps -> knn groups -> one descriptor per group."""
    t0 = time.perf_counter()
    mapped = pcm_map(points)
    t1 = time.perf_counter()
    centers, groups = extract_groups(mapped.cloud, G, K, timings=timings)
    t2 = time.perf_counter()
    feats = extract_all(extractor, groups)
    t3 = time.perf_counter()
    if timings is not None:
        timings["pcm"] = timings.get("pcm", 0.0) + (t1 - t0)
        timings["extract"] = timings.get("extract", 0.0) + (t3 - t2)
    return Featurized(mapped=mapped, centers=centers, features=feats)


def _pmap(fn, items, threads: int):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def build_bank(train_clouds, extractor, G: int, K: int, sample_ids=None, threads: int = 1,
               timings: dict | None = None) -> MemoryBank:
    """Features of every group of every training cloud, in sample then center order."""
    train_clouds = list(train_clouds)
    if not train_clouds:
        raise Ri3dError("at least one training cloud is required")
    if sample_ids is None:
        sample_ids = [str(i) for i in range(len(train_clouds))]

    def run(item):
        sid, cloud = item
        try:
            return featurize(cloud, extractor, G, K, timings=timings if threads <= 1 else None)
        except DegenerateCloud as exc:
            raise DegenerateCloud(str(exc), sample_id=sid) from exc

    results = _pmap(run, list(zip(sample_ids, train_clouds)), threads)
    ids, centers = [], []
    for sid, res in zip(sample_ids, results):
        ids.extend([sid] * len(res.centers))
        centers.append(res.centers)
    return MemoryBank(
        vectors=np.concatenate([r.features for r in results]),
        sample_ids=ids,
        center_indices=np.concatenate(centers),
    )


def score_featurized(bank: MemoryBank, feat: Featurized, timings: dict | None = None) -> ScoreReport:
    t0 = time.perf_counter()
    center_scores, nn_idx = nn_search(bank, feat.features)
    t1 = time.perf_counter()
    if timings is not None:
        timings["nn_search"] = timings.get("nn_search", 0.0) + (t1 - t0)
    per_point = center_scores[nearest_center(feat.mapped.cloud, feat.centers)]
    return ScoreReport(
        center_indices=feat.centers,
        center_scores=center_scores,
        per_point_scores=per_point,
        object_score=float(center_scores.max()),
        nn_indices=nn_idx,
    )


def score_sample(bank: MemoryBank, points, extractor, G: int, K: int,
                 timings: dict | None = None) -> ScoreReport:
    """Score every FPS center by its nearest bank distance and propagate to all points."""
    if extractor.dim != bank.dim:
        raise ShapeError(f"extractor dim {extractor.dim} does not match bank dim {bank.dim}")
    return score_featurized(bank, featurize(points, extractor, G, K, timings=timings), timings=timings)


def score_many(bank: MemoryBank, clouds, extractor, G: int, K: int, threads: int = 1) -> list[ScoreReport]:
    return _pmap(lambda c: score_sample(bank, c, extractor, G, K), list(clouds), threads)


def save_bank(bank: MemoryBank, path) -> Path:
    """Write ``bank.vectors`` to a RIFW file plus a row-aligned ``.meta.jsonl`` sidecar."""
    path = Path(path)
    rifw.save([("bank.vectors", bank.vectors)], path)
    meta = meta_path(path)
    with open(meta, "w", encoding="utf-8") as fh:
        for sid, ci in zip(bank.sample_ids, bank.center_indices):
            fh.write(json.dumps({"sample_id": sid, "center_index": int(ci)}) + "\n")
    return meta


def meta_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".meta.jsonl")


def load_bank(path) -> MemoryBank:
    tensors = rifw.load(path)
    if "bank.vectors" not in tensors or tensors["bank.vectors"].ndim != 2:
        raise ShapeError(f"{path}: no 2-D 'bank.vectors' tensor")
    vectors = tensors["bank.vectors"]
    ids, centers = [], []
    meta = meta_path(path)
    if meta.exists():
        for line in meta.read_text(encoding="utf-8").splitlines():
            if line.strip():
                row = json.loads(line)
                ids.append(row["sample_id"])
                centers.append(row["center_index"])
    else:
        ids = [""] * len(vectors)
        centers = [0] * len(vectors)
    return MemoryBank(vectors=vectors, sample_ids=ids, center_indices=np.array(centers, dtype=np.int64))
