import pytest

from ri3d.augment import S3daConfig
from ri3d.config import RunConfig, default_threads, load_config


def test_defaults():
    cfg = RunConfig()
    assert (cfg.G, cfg.K, cfg.extractor, cfg.seed, cfg.fpr_cap, cfg.weights) == (512, 512, "ctfnet", 0, 0.3, None)
    assert cfg.s3da == S3daConfig()


def test_threads_env(monkeypatch):
    monkeypatch.setenv("RI3D_THREADS", "3")
    assert default_threads() == 3 and RunConfig().threads == 3
    monkeypatch.delenv("RI3D_THREADS")
    assert default_threads() >= 1


@pytest.mark.parametrize("kw", [dict(G=0), dict(K=0), dict(extractor="x"), dict(fpr_cap=0.0), dict(threads=0)])
def test_invalid(kw):
    with pytest.raises(ValueError):
        RunConfig(**kw)


def test_file_then_flags(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('G = 64\nK = 32\nextractor = "baseline"\n[s3da]\nzero_fraction = 0.1\n')
    cfg = load_config(path, {"K": 16, "seed": None, "s3da.jitter_sigma": 0.02})
    assert (cfg.G, cfg.K, cfg.extractor, cfg.seed) == (64, 16, "baseline", 0)
    assert cfg.s3da.zero_fraction == 0.1 and cfg.s3da.jitter_sigma == 0.02


def test_unknown_keys(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text("groups = 3\n")
    with pytest.raises(ValueError):
        load_config(path)
    path.write_text("[s3da]\nrotate = true\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_echo_excludes_threads():
    echo = RunConfig(threads=4).echo()
    assert "threads" not in echo and echo["s3da"]["scale_low"] == 0.8
