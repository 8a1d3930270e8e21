"""Acceptance criteria 1-9. Each test records one PASS/FAIL line, printed in the
terminal summary (see ``conftest.pytest_terminal_summary``)."""

import functools
import json
import time

import numpy as np
import pytest

from ri3d import cli
from ri3d.bank import build_bank, load_bank, nn_distance, save_bank, score_sample
from ri3d.features import BaselineExtractor, CtfNetExtractor, rifw
from ri3d.features.ctfnet import init_weights, load_weights, save_weights
from ri3d.geometry import diameter, pcm_map
from ri3d.io import format_ply, parse_ply, read_cloud
from ri3d.metrics import auroc
from ri3d.pipeline import evaluate_category
from ri3d.sampling import fps
from ri3d.synthetic import SyntheticSpec, gen_synthetic

from conftest import random_motion, screened_clouds
from test_metrics import auroc_pairs
from test_sampling import fps_oracle

RESULTS: dict[int, str] = {}

PCM_TOL = 1e-6
IDEMPOTENT_TOL = 1e-9
ORTHO_TOL = 1e-9
SCORE_TOL = 1e-4
AUROC_TOL = 1e-12
MIN_O_AUROC = 0.9
MIN_P_AUROC = 0.8


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            try:
                detail = fn(*args, **kwargs)
            except BaseException as exc:
                msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
                RESULTS[number] = f"FAIL  criterion {number}: {title} ({msg[:160]})"
                raise
            extra = f"; {detail}" if detail else ""
            RESULTS[number] = f"PASS  criterion {number}: {title} ({time.perf_counter() - t0:.1f}s{extra})"
        return run
    return wrap


@pytest.fixture(scope="module")
def clouds():
    return screened_clouds(seed=2024, count=200)


@pytest.fixture(scope="module")
def synthetic(tmp_path_factory):
    root = tmp_path_factory.mktemp("acceptance_syn")
    spec = SyntheticSpec(categories=("cube",), n_train=4, n_test_normal=5, n_test_defect=5)
    return root, gen_synthetic(0, spec, root)


@criterion(1, "rotation invariance, 200 clouds x 5 motions, 1e-6 relative, < 60 s")
def test_c1_rotation_invariance(clouds):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    worst, failures = 0.0, 0
    for pts in clouds:
        ref = pcm_map(pts).cloud
        diam = diameter(pts)
        for _ in range(5):
            rot, t = random_motion(rng)
            err = np.max(np.abs(pcm_map(pts @ rot.T + t).cloud - ref)) / diam
            worst = max(worst, err)
            failures += err > PCM_TOL
    elapsed = time.perf_counter() - t0
    assert failures == 0, f"{failures} motions exceed {PCM_TOL} (worst {worst:.2e})"
    assert elapsed < 60, f"took {elapsed:.1f}s"
    return f"worst {worst:.1e}, pcm time {elapsed:.1f}s"


@criterion(2, "pcm idempotence within 1e-9 diameter")
def test_c2_idempotence(clouds):
    worst = 0.0
    for pts in clouds:
        once = pcm_map(pts).cloud
        worst = max(worst, np.max(np.abs(pcm_map(once).cloud - once)) / diameter(pts))
    assert worst <= IDEMPOTENT_TOL, f"worst {worst:.2e}"
    return f"worst {worst:.1e}"


@criterion(3, "frame orthonormality within 1e-9 per entry")
def test_c3_orthonormality(clouds):
    rng = np.random.default_rng(8)
    worst, frames = 0.0, 0
    for pts in clouds:
        rot, t = random_motion(rng)
        for p in (pts, pts @ rot.T + t, pcm_map(pts).cloud):
            b = pcm_map(p).frame.basis
            worst = max(worst, np.max(np.abs(b @ b.T - np.eye(3))))
            frames += 1
    assert worst < ORTHO_TOL, f"worst {worst:.2e}"
    return f"{frames} frames, worst {worst:.1e}"


@criterion(4, "end-to-end score invariance, ctfnet G=K=64, 20 trials, < 5 min")
def test_c4_end_to_end(synthetic):
    _, layout = synthetic
    cat = layout.categories["cube"]
    ex = CtfNetExtractor(init_weights(0))
    t0 = time.perf_counter()
    bank = build_bank([read_cloud(p) for p in cat.train], ex, 64, 64)
    rng = np.random.default_rng(4)
    tests = [read_cloud(p) for p in cat.test]
    worst = 0.0
    for trial in range(20):
        pts = tests[trial % len(tests)]
        rot, t = random_motion(rng)
        a = score_sample(bank, pts, ex, 64, 64)
        b = score_sample(bank, pts @ rot.T + t, ex, 64, 64)
        scale = max(np.max(np.abs(a.per_point_scores)), 1e-30)
        err = np.max(np.abs(a.per_point_scores - b.per_point_scores)) / scale
        worst = max(worst, err)
        assert err <= SCORE_TOL, f"trial {trial}: relative error {err:.2e}"
        assert a.center_indices[np.argmax(a.center_scores)] == b.center_indices[np.argmax(b.center_scores)], \
            f"trial {trial}: argmax center differs"
    elapsed = time.perf_counter() - t0
    assert elapsed < 300, f"took {elapsed:.1f}s"
    return f"worst {worst:.1e}"


@criterion(5, "oracle equivalence: fps, nearest neighbour, auroc")
def test_c5_oracles():
    rng = np.random.default_rng(5)
    for _ in range(100):
        n = int(rng.integers(3, 65))
        pts = rng.normal(size=(n, 3))
        m = int(rng.integers(1, n + 1))
        assert fps(pts, m).tolist() == fps_oracle(pts, m)

    vectors = rng.normal(size=(2000, 64)).astype(np.float32)
    from ri3d.bank import MemoryBank
    bank = MemoryBank(vectors)
    queries = rng.normal(size=(1000, 64)).astype(np.float32)
    queries[:50] = vectors[rng.integers(0, 2000, 50)]  # exact hits
    v64 = vectors.astype(np.float64)
    for q in queries:
        diff = v64 - q.astype(np.float64)
        d2 = np.sum(diff * diff, axis=-1)
        i = int(np.argmin(d2))
        assert nn_distance(bank, q) == (float(np.sqrt(d2[i])), i)

    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 201))
        labels = rng.integers(0, 2, n)
        labels[:2] = [0, 1]
        scores = rng.integers(0, 20, n) / 7.0
        err = abs(auroc(scores, labels) - auroc_pairs(scores, labels))
        worst = max(worst, err)
    assert worst <= AUROC_TOL, f"auroc deviates by {worst:.2e}"
    return f"auroc worst {worst:.1e}"


@criterion(6, "metric golden values")
def test_c6_metric_goldens():
    assert auroc([1, 2, 2, 3], [0, 1, 0, 1]) == 0.875
    assert auroc([0.1, 0.2, 0.7, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.9, 0.7, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


@criterion(7, "synthetic benchmark seed 0, G=K=128, O-AUROC >= 0.9 and P-AUROC >= 0.8, < 10 min")
def test_c7_synthetic_benchmark(synthetic):
    _, layout = synthetic
    cat = layout.categories["cube"]
    t0 = time.perf_counter()
    summary, failures = [], []
    for ex in (CtfNetExtractor(init_weights(0)), BaselineExtractor()):
        rep, _ = evaluate_category(cat, ex, 128, 128, 0.3)
        summary.append(f"{ex.name} O={rep.o_auroc:.3f} P={rep.p_auroc:.3f}")
        if not (rep.o_auroc >= MIN_O_AUROC and rep.p_auroc >= MIN_P_AUROC):
            failures.append(summary[-1])
    elapsed = time.perf_counter() - t0
    assert not failures, "below threshold: " + "; ".join(failures)
    assert elapsed < 600, f"took {elapsed:.1f}s"
    return ", ".join(summary)


@criterion(8, "evaluate determinism across runs and thread counts")
def test_c8_determinism(synthetic, tmp_path):
    root, _ = synthetic
    common = ["evaluate", str(root), "--extractor", "ctfnet", "-G", "64", "-K", "64", "--seed", "0"]
    assert cli.main(common + ["--threads", "1", "--out", str(tmp_path / "a.json")]) == 0
    assert cli.main(common + ["--threads", "3", "--out", str(tmp_path / "b.json")]) == 0
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b, "reports differ"
    rep = json.loads(a)
    return f"P-AUROC {rep['P-AUROC']:.4f}"


@criterion(9, "format round trips: weights, bank, ply ascii vs binary on 50 clouds")
def test_c9_round_trips(tmp_path, synthetic):
    params = init_weights(0)
    save_weights(params, tmp_path / "w.rifw")
    loaded = load_weights(tmp_path / "w.rifw")
    for (n1, a), (n2, b) in zip(params.named_tensors(), loaded.named_tensors()):
        assert n1 == n2 and a.dtype == b.dtype and np.array_equal(a, b)
    assert rifw.encode(loaded.named_tensors()) == (tmp_path / "w.rifw").read_bytes()

    _, layout = synthetic
    bank = build_bank([read_cloud(p) for p in layout.categories["cube"].train], BaselineExtractor(), 64, 16)
    save_bank(bank, tmp_path / "bank.rifw")
    back = load_bank(tmp_path / "bank.rifw")
    assert np.array_equal(back.vectors, bank.vectors) and back.sample_ids == bank.sample_ids
    assert np.array_equal(back.center_indices, bank.center_indices)

    rng = np.random.default_rng(9)
    for _ in range(50):
        pts = rng.normal(size=(int(rng.integers(1, 500)), 3)) * 10.0 ** rng.integers(-3, 4)
        a = parse_ply(format_ply(pts, binary=False))
        b = parse_ply(format_ply(pts, binary=True))
        assert np.array_equal(a, b) and np.array_equal(a, pts)


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))
