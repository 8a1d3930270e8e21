"""Command-line entry point: ``ri3d <command> ...``.

Exit codes: 0 success, 1 internal error, 2 invalid input or config.
"""

import argparse
import json
import math
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from ri3d.augment import s3da
from ri3d.bank import build_bank, load_bank, save_bank, score_featurized, featurize, score_sample
from ri3d.config import EXTRACTORS, RunConfig, load_config
from ri3d.errors import Ri3dError
from ri3d.features import make_extractor
from ri3d.features.ctfnet import init_weights, save_weights
from ri3d.geometry import diameter, pcm_map
from ri3d.io import fmt_float, read_cloud, scan_dataset, write_cloud, write_scores
from ri3d.metrics import MetricReport
from ri3d.pipeline import bank_for_category, evaluate_category
from ri3d.rng import RngStream
from ri3d.synthetic import SyntheticSpec, gen_synthetic

BENCH_STAGES = ("pcm", "fps", "knn", "extract", "nn_search")


class UsageError(Ri3dError):
    pass


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


# config plumbing

def _add_run_flags(p: argparse.ArgumentParser, s3da_flags: bool = False) -> None:
    g = p.add_argument_group("run config (flags override --config)")
    g.add_argument("--config", type=Path, help="TOML file with RunConfig keys and an optional [s3da] table")
    g.add_argument("-G", "--groups", dest="G", type=int, help="FPS centers per cloud (default 512)")
    g.add_argument("-K", "--group-size", dest="K", type=int, help="points per group (default 512)")
    g.add_argument("--extractor", choices=EXTRACTORS, help="feature extractor (default ctfnet)")
    g.add_argument("--weights", type=str, help="RIFW weight file; absent means init_weights(seed)")
    g.add_argument("--seed", type=int, help="seed for weights and augmentation (default 0)")
    g.add_argument("--fpr-cap", dest="fpr_cap", type=float, help="AUPRO integration cap (default 0.3)")
    g.add_argument("--threads", type=int, help="worker threads (default $RI3D_THREADS or all cores)")
    if s3da_flags:
        a = p.add_argument_group("augmentation")
        a.add_argument("--scale-low", dest="s3da.scale_low", type=float)
        a.add_argument("--scale-high", dest="s3da.scale_high", type=float)
        a.add_argument("--jitter-sigma", dest="s3da.jitter_sigma", type=float)
        a.add_argument("--jitter-clip", dest="s3da.jitter_clip", type=float)
        a.add_argument("--zero-fraction", dest="s3da.zero_fraction", type=float)


def _run_config(args) -> RunConfig:
    keys = ("G", "K", "extractor", "weights", "seed", "fpr_cap", "threads",
            "s3da.scale_low", "s3da.scale_high", "s3da.jitter_sigma", "s3da.jitter_clip", "s3da.zero_fraction")
    overrides = {k: getattr(args, k, None) for k in keys}
    try:
        return load_config(getattr(args, "config", None), overrides)
    except (ValueError, TypeError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from exc


def _extractor(cfg: RunConfig):
    return make_extractor(cfg.extractor, weights=cfg.weights, seed=cfg.seed)


def _category(args):
    layout = scan_dataset(args.dataset)
    if not layout.categories:
        raise UsageError(f"{args.dataset}: no category with train/ or test/ found")
    if args.category is not None:
        if args.category not in layout.categories:
            raise UsageError(f"unknown category {args.category!r}; have {sorted(layout.categories)}")
        return [layout.categories[args.category]]
    return [layout.categories[k] for k in sorted(layout.categories)]


# number formatting for pcm output

def _quantize(points: np.ndarray, digits: int | None, scale: float) -> np.ndarray:
    """Round to ``digits`` significant digits relative to ``scale``."""
    if digits is None or scale <= 0:
        return points
    quantum = 10.0 ** (math.floor(math.log10(scale)) - digits + 1)
    out = np.round(points / quantum) * quantum
    out = np.array([[float(f"{v:.{digits + 3}g}") for v in row] for row in out])
    out[out == 0] = 0.0
    return out


# commands

def cmd_pcm(args) -> int:
    pts = read_cloud(args.input)
    mapped = pcm_map(pts)
    frame, key = mapped.frame, mapped.key
    cloud = mapped.cloud
    if args.digits is not None:
        if args.digits < 1:
            raise UsageError("--digits must be >= 1")
        cloud = _quantize(cloud, args.digits, diameter(cloud))
    if args.output is not None:
        write_cloud(cloud, args.output, binary=args.binary)
    info = {
        "centroid": [float(v) for v in frame.centroid],
        "basis": [[float(v) for v in row] for row in frame.basis],
        "determinant": float(frame.determinant),
        "key_indices": [int(key.idx1), int(key.idx2), int(key.idx3)],
        "n_points": int(len(pts)),
    }
    sys.stdout.write(_dump(info))
    return 0


def cmd_augment(args) -> int:
    cfg = _run_config(args)
    pts = read_cloud(args.input)
    out = s3da(pts, RngStream(cfg.seed), cfg.s3da)
    write_cloud(out, args.output, binary=args.binary)
    sys.stdout.write(_dump({"config": {"seed": cfg.seed, "s3da": cfg.s3da.to_dict()}, "n_points": len(out)}))
    return 0


def cmd_build_bank(args) -> int:
    cfg = _run_config(args)
    cats = _category(args)
    if len(cats) != 1:
        raise UsageError(f"dataset has {len(cats)} categories; pick one with --category")
    cat = cats[0]
    if not cat.train:
        raise UsageError(f"category {cat.name!r}: missing or empty train/ directory")
    bank = bank_for_category(cat, _extractor(cfg), cfg.G, cfg.K, threads=cfg.threads)
    save_bank(bank, args.out)
    sys.stdout.write(_dump({
        "bank": str(args.out),
        "category": cat.name,
        "count": bank.count,
        "dim": bank.dim,
        "train_samples": len(cat.train),
        "config": cfg.echo(),
    }))
    return 0


def cmd_score(args) -> int:
    cfg = _run_config(args)
    bank = load_bank(args.bank)
    pts = read_cloud(args.cloud)
    report = score_sample(bank, pts, _extractor(cfg), cfg.G, cfg.K)
    write_scores(report, args.out, config=cfg.echo())
    sys.stdout.write(_dump({"object_score": report.object_score, "out": str(args.out)}))
    return 0


def _mean_metric(reports: list[MetricReport], key: str):
    vals = [r.to_dict()[key] for r in reports]
    vals = [v for v in vals if v is not None]
    return float(np.mean(vals)) if vals else None


def cmd_evaluate(args) -> int:
    cfg = _run_config(args)
    cats = _category(args)
    bank = None
    if args.bank is not None:
        if len(cats) != 1:
            raise UsageError("--bank needs a single category; pick one with --category")
        bank = load_bank(args.bank)
    extractor = _extractor(cfg)
    if bank is not None and bank.dim != extractor.dim:
        raise UsageError(f"bank dim {bank.dim} does not match {cfg.extractor} dim {extractor.dim}")
    echo = cfg.echo()
    per_cat = {}
    for cat in cats:
        if not cat.test:
            raise UsageError(f"category {cat.name!r}: missing or empty test/ directory")
        report, _ = evaluate_category(cat, extractor, cfg.G, cfg.K, cfg.fpr_cap,
                                      bank=bank, threads=cfg.threads, config=echo)
        per_cat[cat.name] = report
    if len(per_cat) == 1:
        out = next(iter(per_cat.values())).to_dict()
    else:
        keys = ("P-AUROC", "O-AUROC", "P-AUPRO", "O-AUPRO")
        out = {k: _mean_metric(list(per_cat.values()), k) for k in keys}
        out["config"] = next(iter(per_cat.values())).to_dict()["config"]
    out["categories"] = {k: {m: v for m, v in r.to_dict().items() if m != "config"} for k, r in per_cat.items()}
    _emit(_dump(out), args.out)
    return 0


def cmd_bench(args) -> int:
    cfg = _run_config(args)
    cats = _category(args)
    extractor = _extractor(cfg)
    result = {"config": cfg.echo(), "categories": {}}
    for cat in cats:
        if not cat.train or not cat.test:
            raise UsageError(f"category {cat.name!r} needs both train/ and test/ clouds")
        build_t = {}
        t0 = time.perf_counter()
        bank = build_bank([read_cloud(p) for p in cat.train], extractor, cfg.G, cfg.K, timings=build_t)
        build_s = time.perf_counter() - t0
        tests = [read_cloud(p) for p in cat.test]
        stages = {}
        t0 = time.perf_counter()
        for cloud in tests:
            score_featurized(bank, featurize(cloud, extractor, cfg.G, cfg.K, timings=stages), timings=stages)
        score_s = time.perf_counter() - t0
        result["categories"][cat.name] = {
            "build_seconds": build_s,
            "build_stage_seconds": {k: build_t.get(k, 0.0) for k in BENCH_STAGES[:4]},
            "score_stage_seconds": {k: stages.get(k, 0.0) for k in BENCH_STAGES},
            "score_seconds": score_s,
            "test_samples": len(tests),
            "samples_per_second": len(tests) / score_s if score_s > 0 else None,
            "seconds_per_sample": score_s / len(tests),
            "bank_count": bank.count,
            "bank_dim": bank.dim,
            "bank_memory_bytes": bank.nbytes_estimate,
        }
    _emit(_dump(result), args.out)
    return 0


def cmd_gen_synthetic(args) -> int:
    data = {}
    if args.spec is not None:
        try:
            data = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read spec {args.spec}: {exc}") from exc
    for key in ("n_train", "n_test_normal", "n_test_defect", "n_points", "noise_sigma"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.categories is not None:
        data["categories"] = args.categories.split(",")
    try:
        spec = SyntheticSpec.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid synthetic spec: {exc}") from exc
    layout = gen_synthetic(args.seed, spec, args.out)
    sys.stdout.write(_dump({
        "out": str(args.out),
        "seed": args.seed,
        "spec": spec.to_dict(),
        "categories": {k: {"train": len(c.train), "test": len(c.test)} for k, c in layout.categories.items()},
    }))
    return 0


def cmd_init_weights(args) -> int:
    params = init_weights(args.seed)
    save_weights(params, args.out)
    sys.stdout.write(_dump({"out": str(args.out), "seed": args.seed, "parameters": params.parameter_count}))
    return 0


# parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ri3d", description="Rotation-invariant point-cloud anomaly detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pcm", help="canonicalize a cloud; prints the frame and determinant")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path, nargs="?", help="mapped cloud (.xyz or .ply)")
    p.add_argument("--digits", type=int, help="round output to N significant digits relative to the diameter")
    p.add_argument("--binary", action="store_true", help="binary PLY output")
    p.set_defaults(func=cmd_pcm)

    p = sub.add_parser("augment", help="apply scaling, jitter and zeroing with a seeded stream")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--binary", action="store_true", help="binary PLY output")
    _add_run_flags(p, s3da_flags=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("build-bank", help="build a memory bank from a category's train split")
    p.add_argument("dataset", type=Path)
    p.add_argument("--out", type=Path, required=True, help="bank file (RIFW) plus .meta.jsonl sidecar")
    p.add_argument("--category")
    _add_run_flags(p)
    p.set_defaults(func=cmd_build_bank)

    p = sub.add_parser("score", help="score one cloud against a bank")
    p.add_argument("bank", type=Path)
    p.add_argument("cloud", type=Path)
    p.add_argument("--out", type=Path, required=True, help="per-point CSV plus .json sidecar")
    _add_run_flags(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="evaluate test splits; writes a metric report as JSON")
    p.add_argument("dataset", type=Path)
    p.add_argument("--bank", type=Path, help="prebuilt bank; otherwise built from train/")
    p.add_argument("--category")
    p.add_argument("--out", type=Path, help="report path (default stdout)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("bench", help="per-stage wall time, throughput and bank memory")
    p.add_argument("dataset", type=Path)
    p.add_argument("--category")
    p.add_argument("--out", type=Path, help="JSON path (default stdout)")
    _add_run_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen-synthetic", help="write a synthetic defect dataset")
    p.add_argument("out", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--spec", type=Path, help="JSON file with SyntheticSpec fields")
    p.add_argument("--categories", help="comma-separated shapes (cube, sphere)")
    p.add_argument("--n-train", dest="n_train", type=int)
    p.add_argument("--n-test-normal", dest="n_test_normal", type=int)
    p.add_argument("--n-test-defect", dest="n_test_defect", type=int)
    p.add_argument("--n-points", dest="n_points", type=int)
    p.add_argument("--noise-sigma", dest="noise_sigma", type=float)
    p.set_defaults(func=cmd_gen_synthetic)

    p = sub.add_parser("init-weights", help="write seeded CTF-Net weights to a RIFW file")
    p.add_argument("out", type=Path)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_init_weights)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 2
    try:
        return args.func(args)
    except (Ri3dError, FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except Exception:  # noqa: BLE001
        traceback.print_exc()
        return 1


if __name__ == "__main__":
    sys.exit(main())
