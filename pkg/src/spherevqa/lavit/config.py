"""Model and training configuration presets."""

from __future__ import annotations

import json
import math
import os
from dataclasses import asdict, dataclass, fields, replace

from ..sphere_geom import SpatialMode

REFERENCE_STD = 0.02
REFERENCE_WIDTH = 768


@dataclass(frozen=True)
class ModelConfig:
    d: int = 64
    heads: int = 4
    layers_lang: int = 3
    layers_audio: int = 2
    layers_vis: int = 2
    layers_cross: int = 2
    vocab_size: int = 64
    answer_size: int = 32
    spatial_mode: str = "quaternion"
    dropout: float = 0.1
    region_dim: int = 18
    audio_dim: int = 15
    max_len: int = 24
    max_regions: int = 35
    pool: str = "cls"  # "cls" reads row 0, "mean" averages the valid output rows
    dtype: str = "float32"
    init_std: float | None = None  # None: 0.02 scaled to keep the per-layer gain of width 768

    @property
    def weight_std(self) -> float:
        if self.init_std is not None:
            return self.init_std
        return REFERENCE_STD * math.sqrt(REFERENCE_WIDTH / self.d)

    def __post_init__(self):
        SpatialMode(self.spatial_mode)
        if self.d % self.heads:
            raise ValueError("d must be divisible by heads")
        if self.layers_cross != 2:
            raise ValueError("the cross-modal encoder has exactly two stages")
        if self.pool not in ("cls", "mean"):
            raise ValueError("pool must be 'cls' or 'mean'")

    @classmethod
    def paper(cls, **kw) -> "ModelConfig":
        base = dict(d=768, heads=12, layers_lang=9, layers_audio=5, layers_vis=5,
                    layers_cross=2, vocab_size=30522, answer_size=2020, max_len=40)
        base.update(kw)
        return cls(**base)

    @classmethod
    def desk(cls, **kw) -> "ModelConfig":
        return cls(**kw)

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    grad_accum: int = 1
    lr: float = 1e-3
    epochs: int = 10
    warmup: float = 0.1
    weight_decay: float = 0.01
    grounding_weight: float = 0.2
    mask_prob: float = 0.15
    seed: int = 0

    @classmethod
    def paper(cls, phase: str, **kw) -> "TrainConfig":
        if phase == "pretrain":
            base = dict(batch_size=32, grad_accum=4, lr=1e-4, epochs=3)
        elif phase == "finetune":
            base = dict(batch_size=32, grad_accum=4, lr=5e-5, epochs=7)
        else:
            raise ValueError(f"unknown phase {phase!r}")
        base.update(kw)
        return cls(**base)

    @classmethod
    def desk(cls, phase: str, **kw) -> "TrainConfig":
        if phase == "pretrain":
            base = dict(batch_size=32, grad_accum=1, lr=1e-3, epochs=2)
        elif phase == "finetune":
            base = dict(batch_size=32, grad_accum=1, lr=1e-3, epochs=12)
        else:
            raise ValueError(f"unknown phase {phase!r}")
        base.update(kw)
        return cls(**base)

    def to_json(self) -> dict:
        return asdict(self)


ENV_PREFIX = "SPHEREVQA_"


def apply_env_overrides(cfg, environ=None):
    """Override dataclass fields from ``SPHEREVQA_<FIELD>`` environment variables."""
    environ = os.environ if environ is None else environ
    updates = {}
    for f in fields(cfg):
        key = ENV_PREFIX + f.name.upper()
        if key in environ:
            cur = getattr(cfg, f.name)
            raw = environ[key]
            updates[f.name] = type(cur)(json.loads(raw)) if not isinstance(cur, str) else raw
    return replace(cfg, **updates) if updates else cfg
