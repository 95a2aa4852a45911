"""Flat training configuration shared by the library and the CLI."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, fields
from pathlib import Path

VARIANTS = ("full", "s_only", "g_only", "mlp_fusion")


@dataclass
class TrainConfig:
    # model
    d: int = 64
    max_len: int = 50
    blocks: int = 2
    heads: int = 2
    ffn_mult: int = 4
    dropout: float = 0.2
    z: int = 3
    gcn_layers: int = 2
    gcn_normalize: bool = False
    variant: str = "full"
    # objective
    lam: float = 0.1
    cross_negatives: str = "cross"
    mask_ratio: float = 0.3
    crop_ratio: float = 0.6
    reorder_ratio: float = 0.6
    # optimisation
    batch_size: int = 256
    lr: float = 1e-3
    weight_decay: float = 0.0
    grad_clip: float = 5.0
    max_epochs: int = 100
    patience: int = 10
    sliding_window: bool = False
    # evaluation
    eval_batch_size: int = 512
    exclude_history: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for name in ("d", "max_len", "heads", "batch_size", "max_epochs", "patience", "eval_batch_size"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.blocks < 0 or self.gcn_layers < 0:
            raise ValueError("blocks and gcn_layers must be >= 0")
        if self.d % self.heads:
            raise ValueError("heads must divide d")
        if self.batch_size < 2:
            raise ValueError("batch_size must be >= 2 for in-batch negatives")
        if self.lam < 0 or self.lr <= 0 or self.weight_decay < 0:
            raise ValueError("lam, lr and weight_decay must be non-negative (lr > 0)")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)

    def with_overrides(self, pairs: list[str]) -> "TrainConfig":
        """Apply ``key=value`` strings, coercing to the field's type."""
        types = {f.name: f.type for f in fields(self)}
        changes = {}
        for pair in pairs:
            key, sep, raw = pair.partition("=")
            if not sep or key not in types:
                raise ValueError(f"bad override {pair!r}")
            current = getattr(self, key)
            if isinstance(current, bool):
                if raw.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(f"{key} expects a boolean")
                changes[key] = raw.lower() in ("true", "1")
            elif isinstance(current, int):
                changes[key] = int(raw)
            elif isinstance(current, float):
                changes[key] = float(raw)
            else:
                changes[key] = raw
        return self.replace(**changes)
