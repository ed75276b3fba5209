"""Dataclass configs for the pipeline, training and models.

Everything that influences an artifact is part of a config dataclass; the
canonical-JSON hash of the config is stamped into every output header so
artifacts can be traced back to the run that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

CODE_VERSION = "0.1.0"


@dataclass
class QuotaTable:
    """Per script-pair sampling budgets and acceptance rates.

    ``same_rate`` is the global sampling rate for same-script
    cross-language pairs. When a script-pair's remaining budget drops
    below ``low_budget_frac * n_per_pair``, acceptance switches to a
    weighted regime: same-script candidates are accepted at ``same_rate``
    and cross-script candidates at ``min(1, cross_weight * same_rate)``,
    i.e. cross-script pairs are 3x more likely to be kept by default.
    """

    n_per_pair: int = 2_000
    cross_weight: float = 3.0
    same_rate: float = 0.2
    low_budget_frac: float = 0.2

    def acceptance_prob(self, cross_script: bool, cross_language: bool,
                        low_budget: bool) -> float:
        if low_budget:
            if cross_script:
                return min(1.0, self.cross_weight * self.same_rate)
            return self.same_rate
        if not cross_script and cross_language:
            return self.same_rate
        return 1.0


@dataclass
class NoiseConfig:
    """Character-noise probabilities (applied in a fixed operation order)."""

    apply_prob: float = 0.3
    insert_prob: float = 0.1
    delete_prob: float = 0.1
    substitute_prob: float = 0.05
    transpose_prob: float = 0.05


@dataclass
class EncoderConfig:
    """Shared Teacher/Student trunk shape.

    The Student's per-position input (char + script + language embedding)
    must equal the Teacher's feature projection width so both share one
    trunk configuration.
    """

    embed_dim: int = 128
    trunk_hidden: int = 128          # recurrent width per direction
    attn_heads: int = 4
    pool_hidden: int = 128           # additive attention-pooling width
    char_dim: int = 96
    script_dim: int = 16
    lang_dim: int = 16
    feature_dim: int = 24
    n_scripts: int = 20
    vocab_size: int = 0              # filled from the vocabulary artifact
    n_langs: int = 1                 # includes UNK, filled from lang table
    max_len: int = 512

    @property
    def trunk_in(self) -> int:
        return self.char_dim + self.script_dim + self.lang_dim


@dataclass
class TrainConfig:
    """One training phase's hyperparameters."""

    phase: int = 1
    margin: float = 0.3
    alpha: float = 0.5
    batch_size: int = 128
    epochs: int = 50
    base_lr: float = 1e-3
    weight_decay: float = 1e-5
    lang_dropout: float = 0.5
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    noise_enabled: bool = False
    val_frac: float = 0.1
    seed: int = 7
    threads: int = 1

    @classmethod
    def phase1(cls, **overrides: Any) -> "TrainConfig":
        cfg = cls(phase=1, margin=0.3, epochs=50, base_lr=1e-3)
        return _replace(cfg, overrides)

    @classmethod
    def phase2(cls, **overrides: Any) -> "TrainConfig":
        cfg = cls(phase=2, epochs=5, base_lr=1e-3, noise_enabled=True)
        return _replace(cfg, overrides)

    @classmethod
    def phase3(cls, **overrides: Any) -> "TrainConfig":
        # Fine-tuning default 1e-4 with cosine decay; a conservative 1e-5
        # preset is available for long runs where drift matters more.
        cfg = cls(phase=3, margin=0.2, epochs=30, base_lr=1e-4)
        return _replace(cfg, overrides)

    @classmethod
    def phase3_conservative(cls, **overrides: Any) -> "TrainConfig":
        cfg = cls.phase3(base_lr=1e-5)
        return _replace(cfg, overrides)


def _replace(cfg: Any, overrides: dict[str, Any]) -> Any:
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config field: {key}")
        setattr(cfg, key, value)
    return cfg


@dataclass
class PipelineConfig:
    """Paths and knobs for the end-to-end CLI pipeline."""

    workdir: str = "work"
    corpus: str = "work/places.jsonl"
    vocab: str = "work/vocab.tsv"
    langs: str = "work/langs.tsv"
    toponyms: str = "work/toponyms.tsv"
    pairs: str = "work/pairs.tsv"
    triplets_random: str = "work/triplets_random.tsv"
    triplets_hard: str = "work/triplets_hard.tsv"
    checkpoint_dir: str = "work/checkpoints"
    embeddings: str = "work/embeddings.bin"
    index: str = "work/index.bin"
    reports: str = "work/reports"
    overlay: str = ""                # optional precomputed-IPA file
    g2p_langs: list[str] = field(default_factory=list)  # empty = all bundled
    exclude_places: str = ""         # place ids held out from pair generation
    seed: int = 7
    index_mode: str = "hnsw"
    hnsw_m: int = 16
    hnsw_ef_construction: int = 100
    hnsw_ef_search: int = 128
    quotas: QuotaTable = field(default_factory=QuotaTable)
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    phase1: TrainConfig = field(default_factory=TrainConfig.phase1)
    phase2: TrainConfig = field(default_factory=TrainConfig.phase2)
    phase3: TrainConfig = field(default_factory=TrainConfig.phase3)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True,
                               separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            yaml.safe_dump(self.to_dict(), sort_keys=False),
            encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "PipelineConfig":
        kwargs: dict[str, Any] = {}
        nested = {
            "quotas": QuotaTable,
            "encoder": EncoderConfig,
            "phase1": TrainConfig,
            "phase2": TrainConfig,
            "phase3": TrainConfig,
        }
        valid = {f.name for f in fields(cls)}
        for key, value in raw.items():
            if key not in valid:
                raise ValueError(f"unknown config field: {key}")
            if key in nested and isinstance(value, dict):
                value = dict(value)
                if key.startswith("phase") and isinstance(value.get("noise"), dict):
                    value["noise"] = NoiseConfig(**value["noise"])
                kwargs[key] = nested[key](**value)
            else:
                kwargs[key] = value
        return cls(**kwargs)


def artifact_header(kind: str, config_hash: str, seed: int,
                    extra: str = "") -> str:
    """Standard first line for every text artifact."""
    suffix = f" {extra}" if extra else ""
    return (f"# phonotope-{kind} v1 config={config_hash} seed={seed} "
            f"version={CODE_VERSION}{suffix}")
