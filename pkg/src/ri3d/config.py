"""Run configuration: defaults, TOML file override, command-line override."""

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import tomli

from ri3d.augment import S3daConfig
from ri3d.metrics import DEFAULT_FPR_CAP

EXTRACTORS = ("ctfnet", "baseline")


def default_threads() -> int:
    env = os.environ.get("RI3D_THREADS")
    if env:
        return int(env)
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    G: int = 512
    K: int = 512
    extractor: str = "ctfnet"
    weights: str | None = None
    seed: int = 0
    fpr_cap: float = DEFAULT_FPR_CAP
    s3da: S3daConfig = field(default_factory=S3daConfig)
    threads: int = field(default_factory=default_threads)

    def __post_init__(self):
        if self.G < 1 or self.K < 1:
            raise ValueError(f"G and K must be >= 1, got G={self.G}, K={self.K}")
        if self.extractor not in EXTRACTORS:
            raise ValueError(f"unknown extractor {self.extractor!r}; expected one of {EXTRACTORS}")
        if not 0 < self.fpr_cap <= 1:
            raise ValueError(f"fpr_cap must lie in (0, 1], got {self.fpr_cap}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def echo(self) -> dict:
        """Effective settings for output files. Thread count is left out so outputs
        stay byte-identical across thread counts."""
        out = asdict(self)
        out.pop("threads")
        return out


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the TOML file (if any), then non-None ``overrides``.

    The file may hold top-level RunConfig keys and an ``[s3da]`` table.
    """
    cfg = RunConfig()
    if path is not None:
        data = tomli.loads(Path(path).read_text(encoding="utf-8"))
        cfg = _merge(cfg, data)
    if overrides:
        s3da = {k[len("s3da."):]: v for k, v in overrides.items() if k.startswith("s3da.") and v is not None}
        top = {k: v for k, v in overrides.items() if not k.startswith("s3da.") and v is not None}
        if s3da:
            top["s3da"] = s3da
        cfg = _merge(cfg, top)
    return cfg


def _merge(cfg: RunConfig, data: dict) -> RunConfig:
    known = {f.name for f in fields(RunConfig)}
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    data = dict(data)
    if "s3da" in data:
        s3da = data["s3da"]
        if isinstance(s3da, dict):
            s3_known = {f.name for f in fields(S3daConfig)}
            if set(s3da) - s3_known:
                raise ValueError(f"unknown s3da keys: {sorted(set(s3da) - s3_known)}")
            data["s3da"] = replace(cfg.s3da, **s3da)
    return replace(cfg, **data)
