"""Pipeline configuration: key = value files, env overrides, config hashing."""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Mapping

ENV_PREFIX = "SOCIOLECT_"

# keys that never influence results, excluded from the config hash
_UNHASHED = {"out", "jobs"}


@dataclass
class PipelineConfig:
    corpus: str = ""
    out: str = "runs/default"
    seed: int = 0
    jobs: int = 1
    sample_size: int = 80000
    type_top_fraction: float = 0.2
    type_min_count: int = 10
    sense_top_fraction: float = 0.1
    sense_min_total: int = 500
    sense_min_breadth: int = 350
    wsi_method: str = "kmeans"
    gamma: float = 10000.0
    knn: int = 7
    max_clusters: int = 25
    k_max: int = 10
    n_init: int = 10
    train_examples: int = 500
    bot_window: int = 5
    bot_repeats: int = 10
    percentile: float = 98.0
    loyalty_min_comments: int = 10
    top_user_fraction: float = 0.2
    closeness_pivots: int = 5000
    glossaries: str = ""
    topics: str = ""
    high_f_topics: str = "Technology,TV,Video Games,Hobbies/Occupations,Sports,Other"
    pos_sidecar: str = ""
    shards: str = ""

    @classmethod
    def load(
        cls,
        path: str | Path | None = None,
        overrides: Mapping[str, object] | None = None,
        env: Mapping[str, str] | None = None,
    ) -> "PipelineConfig":
        """Defaults, then config file, then SOCIOLECT_* env vars, then overrides."""
        values: dict[str, object] = {}
        if path:
            values.update(_parse_file(Path(path)))
        env = os.environ if env is None else env
        for f in fields(cls):
            key = ENV_PREFIX + f.name.upper()
            if key in env:
                values[f.name] = env[key]
        if overrides:
            values.update({k: v for k, v in overrides.items() if v is not None})
        cfg = cls()
        valid = {f.name: f for f in fields(cls)}
        for key, raw in values.items():
            if key not in valid:
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(raw, type(getattr(cfg, key))))
        _validate(cfg)
        return cfg

    def resolved_text(self) -> str:
        lines = [f"{f.name} = {getattr(self, f.name)}" for f in sorted(fields(self), key=lambda f: f.name)]
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        lines = [
            f"{f.name} = {getattr(self, f.name)}"
            for f in sorted(fields(self), key=lambda f: f.name)
            if f.name not in _UNHASHED
        ]
        return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()[:16]

    def write_resolved(self, outdir: str | Path) -> None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "config.resolved").write_text(self.resolved_text(), encoding="utf-8")

    def high_f_topic_list(self) -> list[str]:
        return [t.strip() for t in self.high_f_topics.split(",") if t.strip()]


def _parse_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected key = value")
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip()
    return values


def _coerce(raw: object, target: type):
    if isinstance(raw, target):
        return raw
    text = str(raw)
    if target is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if target is int:
        return int(text)
    if target is float:
        return float(text)
    return text


def _validate(cfg: PipelineConfig) -> None:
    positive = [
        "sample_size", "type_top_fraction", "type_min_count", "sense_top_fraction",
        "sense_min_total", "sense_min_breadth", "gamma", "knn", "max_clusters",
        "k_max", "n_init", "train_examples", "bot_window", "bot_repeats",
        "percentile", "loyalty_min_comments", "top_user_fraction", "closeness_pivots",
    ]
    for name in positive:
        if getattr(cfg, name) <= 0:
            raise ValueError(f"config {name} must be positive")
    if cfg.wsi_method not in ("kmeans", "spectral", "substitution"):
        raise ValueError(f"unknown wsi_method {cfg.wsi_method!r}")
    if cfg.jobs < 1:
        raise ValueError("jobs must be at least 1")
