"""Readers and writers for clouds, labels, score reports and the dataset layout.

Dataset layout (same shape as Anomaly-ShapeNet / Real3D-AD)::

    root/<category>/train/*.xyz|*.ply   normal training clouds
    root/<category>/test/*.xyz|*.ply    test clouds
    root/<category>/gt/<stem>.txt       per-point labels for test/<stem>.*

A test cloud without a gt file is treated as all-normal.
"""

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ri3d.errors import BadMagic, ParseError, TruncatedFile, UnsupportedFormat

CLOUD_SUFFIXES = (".xyz", ".ply")

_PLY_TYPES = {
    "char": "i1", "int8": "i1", "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2", "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4", "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def fmt_float(x: float) -> str:
    """Shortest string that round-trips to the same float64."""
    return repr(float(x))


# xyz

def parse_xyz(text: str) -> np.ndarray:
    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) != 3:
            raise ParseError(f"expected 3 columns, got {len(tokens)}", line=lineno)
        try:
            rows.append([float(t) for t in tokens])
        except ValueError:
            raise ParseError(f"non-numeric token in {line!r}", line=lineno) from None
    if not rows:
        return np.zeros((0, 3))
    pts = np.array(rows, dtype=np.float64)
    if not np.all(np.isfinite(pts)):
        raise ParseError("non-finite coordinate")
    return pts


def format_xyz(points) -> str:
    return "".join(f"{fmt_float(x)} {fmt_float(y)} {fmt_float(z)}\n" for x, y, z in np.asarray(points, dtype=np.float64))


# ply

@dataclass
class _PlyElement:
    name: str
    count: int
    props: list = field(default_factory=list)  # (name, dtype) or (name, (count_dtype, item_dtype))


def _parse_ply_header(data: bytes):
    if not data.startswith(b"ply"):
        raise BadMagic("missing 'ply' magic")
    end = re.search(rb"end_header\r?\n", data)
    if end is None:
        raise TruncatedFile("PLY header has no end_header line")
    lines = data[:end.start()].decode("ascii", errors="replace").splitlines()
    if lines[0].strip() != "ply":
        raise BadMagic("missing 'ply' magic")
    fmt = None
    elements = []
    for lineno, raw in enumerate(lines[1:], start=2):
        tokens = raw.split()
        if not tokens or tokens[0] in ("comment", "obj_info"):
            continue
        key = tokens[0]
        if key == "format":
            if len(tokens) != 3 or tokens[2] != "1.0" or tokens[1] not in ("ascii", "binary_little_endian"):
                raise UnsupportedFormat(f"unsupported format line {raw.strip()!r}", line=lineno)
            fmt = tokens[1]
        elif key == "element":
            if len(tokens) != 3:
                raise ParseError(f"bad element line {raw.strip()!r}", line=lineno)
            elements.append(_PlyElement(tokens[1], int(tokens[2])))
        elif key == "property":
            if not elements:
                raise ParseError("property before any element", line=lineno)
            try:
                if tokens[1] == "list":
                    prop = (tokens[4], (_PLY_TYPES[tokens[2]], _PLY_TYPES[tokens[3]]))
                else:
                    prop = (tokens[2], _PLY_TYPES[tokens[1]])
            except (KeyError, IndexError):
                raise ParseError(f"bad property line {raw.strip()!r}", line=lineno) from None
            elements[-1].props.append(prop)
        else:
            raise ParseError(f"unknown header keyword {key!r}", line=lineno)
    if fmt is None:
        raise UnsupportedFormat("PLY header has no format line")
    return fmt, elements, end.end()


def _vertex_columns(el: _PlyElement) -> list[int]:
    names = [p[0] for p in el.props]
    try:
        return [names.index(axis) for axis in "xyz"]
    except ValueError:
        raise ParseError("vertex element lacks x, y and z properties") from None


def _ply_ascii(body: bytes, elements) -> np.ndarray:
    lines = [ln for ln in body.decode("ascii", errors="replace").splitlines() if ln.strip()]
    pos = 0
    for el in elements:
        if pos + el.count > len(lines):
            raise TruncatedFile(f"element {el.name!r} needs {el.count} lines, body ends early")
        if el.name != "vertex":
            pos += el.count
            continue
        cols = _vertex_columns(el)
        out = np.empty((el.count, 3))
        for i in range(el.count):
            tokens = lines[pos + i].split()
            values, t = [], 0
            for _, dtype in el.props:
                if isinstance(dtype, tuple):
                    n = int(tokens[t])
                    values.append(None)
                    t += 1 + n
                else:
                    values.append(tokens[t] if t < len(tokens) else None)
                    t += 1
            try:
                out[i] = [float(values[c]) for c in cols]
            except (TypeError, ValueError):
                raise ParseError(f"bad vertex row {lines[pos + i]!r}", line=None) from None
        return out
    raise ParseError("PLY file has no vertex element")


def _ply_binary(body: bytes, elements) -> np.ndarray:
    pos = 0
    for el in elements:
        scalar = all(not isinstance(d, tuple) for _, d in el.props)
        if scalar:
            dtype = np.dtype([(name, "<" + d) for name, d in el.props])
            size = dtype.itemsize * el.count
            if pos + size > len(body):
                raise TruncatedFile(f"element {el.name!r} truncated")
            if el.name == "vertex":
                _vertex_columns(el)
                rec = np.frombuffer(body, dtype=dtype, count=el.count, offset=pos)
                return np.stack([rec[a].astype(np.float64) for a in "xyz"], axis=1)
            pos += size
            continue
        if el.name == "vertex":
            cols = _vertex_columns(el)
            out = np.empty((el.count, 3))
        for i in range(el.count):
            row = []
            for _, d in el.props:
                if isinstance(d, tuple):
                    cdt, idt = np.dtype("<" + d[0]), np.dtype("<" + d[1])
                    if pos + cdt.itemsize > len(body):
                        raise TruncatedFile(f"element {el.name!r} truncated")
                    n = int(np.frombuffer(body, cdt, 1, pos)[0])
                    pos += cdt.itemsize + n * idt.itemsize
                    row.append(None)
                else:
                    dt = np.dtype("<" + d)
                    if pos + dt.itemsize > len(body):
                        raise TruncatedFile(f"element {el.name!r} truncated")
                    row.append(float(np.frombuffer(body, dt, 1, pos)[0]))
                    pos += dt.itemsize
            if el.name == "vertex":
                out[i] = [row[c] for c in cols]
        if pos > len(body):
            raise TruncatedFile(f"element {el.name!r} truncated")
        if el.name == "vertex":
            return out
    raise ParseError("PLY file has no vertex element")


def parse_ply(data: bytes) -> np.ndarray:
    """x, y, z of the ``vertex`` element from ascii or binary_little_endian PLY 1.0."""
    fmt, elements, start = _parse_ply_header(bytes(data))
    body = bytes(data[start:])
    pts = _ply_ascii(body, elements) if fmt == "ascii" else _ply_binary(body, elements)
    if not np.all(np.isfinite(pts)):
        raise ParseError("non-finite coordinate")
    return pts


def format_ply(points, binary: bool = False) -> bytes:
    pts = np.asarray(points, dtype=np.float64)
    fmt = "binary_little_endian" if binary else "ascii"
    header = (
        f"ply\nformat {fmt} 1.0\nelement vertex {len(pts)}\n"
        "property double x\nproperty double y\nproperty double z\nend_header\n"
    ).encode("ascii")
    if binary:
        return header + pts.astype("<f8").tobytes()
    return header + format_xyz(pts).encode("ascii")


def read_cloud(path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        return parse_ply(path.read_bytes())
    return parse_xyz(path.read_text(encoding="utf-8"))


def write_cloud(points, path, binary: bool = False) -> None:
    path = Path(path)
    if path.suffix.lower() == ".ply":
        path.write_bytes(format_ply(points, binary=binary))
    else:
        path.write_text(format_xyz(points), encoding="utf-8")


# labels

@dataclass
class GroundTruth:
    labels: np.ndarray
    region_ids: np.ndarray | None = None

    @classmethod
    def normal(cls, n: int) -> "GroundTruth":
        return cls(labels=np.zeros(n, dtype=np.int64))


def parse_labels(text: str) -> GroundTruth:
    labels, regions = [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if len(tokens) > 2:
            raise ParseError(f"expected 1 or 2 columns, got {len(tokens)}", line=lineno)
        if tokens[0] not in ("0", "1"):
            raise ParseError(f"label must be 0 or 1, got {tokens[0]!r}", line=lineno)
        label = int(tokens[0])
        region = 0
        if len(tokens) == 2:
            if not tokens[1].isdigit():
                raise ParseError(f"region id must be a non-negative integer, got {tokens[1]!r}", line=lineno)
            region = int(tokens[1])
            if region > 0 and label == 0:
                raise ParseError("positive region id on a normal point", line=lineno)
        labels.append(label)
        regions.append(region)
    region_ids = np.array(regions, dtype=np.int64) if any(regions) else None
    return GroundTruth(labels=np.array(labels, dtype=np.int64), region_ids=region_ids)


def format_labels(gt: GroundTruth) -> str:
    if gt.region_ids is None:
        return "".join(f"{int(v)}\n" for v in gt.labels)
    return "".join(f"{int(v)} {int(r)}\n" for v, r in zip(gt.labels, gt.region_ids))


# score reports

SCORE_HEADER = "point_index,score,is_center"


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_scores(report, path, config: dict | None = None) -> None:
    """CSV of per-point scores plus a JSON sidecar with the object score and config echo."""
    path = Path(path)
    is_center = np.zeros(len(report.per_point_scores), dtype=bool)
    is_center[np.asarray(report.center_indices, dtype=np.int64)] = True
    lines = [SCORE_HEADER]
    lines.extend(f"{i},{fmt_float(s)},{int(c)}" for i, (s, c) in enumerate(zip(report.per_point_scores, is_center)))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    side = {
        "object_score": float(report.object_score) if len(report.per_point_scores) else None,
        "center_indices": [int(c) for c in report.center_indices],
        "center_scores": [float(s) for s in report.center_scores],
        "config": config or {},
    }
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_scores(path) -> tuple[np.ndarray, np.ndarray, dict]:
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != SCORE_HEADER:
        raise ParseError(f"{path}: missing header {SCORE_HEADER!r}", line=1)
    scores, centers = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3 or int(parts[0]) != lineno - 2:
            raise ParseError(f"bad score row {line!r}", line=lineno)
        scores.append(float(parts[1]))
        centers.append(parts[2] == "1")
    side = sidecar_path(path)
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    return np.array(scores, dtype=np.float64), np.array(centers, dtype=bool), meta


# dataset layout

@dataclass
class CategoryLayout:
    name: str
    train: list[Path]
    test: list[Path]
    gt: dict[str, Path]

    def ground_truth(self, test_path: Path, n_points: int) -> GroundTruth:
        gt_file = self.gt.get(Path(test_path).stem)
        if gt_file is None:
            return GroundTruth.normal(n_points)
        gt = parse_labels(gt_file.read_text(encoding="utf-8"))
        if len(gt.labels) != n_points:
            raise ParseError(f"{gt_file}: {len(gt.labels)} labels for {n_points} points")
        return gt


@dataclass
class DatasetLayout:
    root: Path
    categories: dict[str, CategoryLayout]


def _clouds_in(directory: Path) -> list[Path]:
    if not directory.is_dir():
        return []
    files = sorted(p for p in directory.iterdir() if p.suffix.lower() in CLOUD_SUFFIXES)
    stems = [p.stem for p in files]
    if len(set(stems)) != len(stems):
        raise ParseError(f"{directory}: duplicate file stems")
    return files


def scan_dataset(root) -> DatasetLayout:
    """Index ``root``; a directory with its own ``train/`` is treated as a single category."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    dirs = [root] if (root / "train").is_dir() else sorted(p for p in root.iterdir() if p.is_dir())
    categories = {}
    for d in dirs:
        if not (d / "train").is_dir() and not (d / "test").is_dir():
            continue
        gt_dir = d / "gt"
        gt = {p.stem: p for p in sorted(gt_dir.glob("*.txt"))} if gt_dir.is_dir() else {}
        categories[d.name] = CategoryLayout(d.name, _clouds_in(d / "train"), _clouds_in(d / "test"), gt)
    return DatasetLayout(root=root, categories=categories)
