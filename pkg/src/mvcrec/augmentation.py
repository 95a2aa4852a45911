"""Stochastic sequence augmentations: mask, crop and reorder."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

OPERATORS = ("mask", "crop", "reorder")


@dataclass
class AugmentConfig:
    mask_ratio: float = 0.3
    crop_keep_ratio: float = 0.6
    reorder_ratio: float = 0.6

    def __post_init__(self):
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError("mask_ratio must lie in [0, 1]")
        if not 0.0 < self.crop_keep_ratio <= 1.0:
            raise ValueError("crop_keep_ratio must lie in (0, 1]")
        if not 0.0 <= self.reorder_ratio <= 1.0:
            raise ValueError("reorder_ratio must lie in [0, 1]")


def _portion(ratio: float, n: int) -> int:
    # tolerate products like 0.29 * 100 = 28.999999999999996
    return int(math.floor(ratio * n + 1e-9))


def sequence_rng(seed: int, user: int, epoch: int, position: int = 0) -> np.random.Generator:
    """Independent stream per (seed, user, epoch, instance position)."""
    return np.random.default_rng([seed, user, epoch, position])


def mask(seq: Sequence[int], ratio: float, mask_index: int, rng: np.random.Generator) -> list[int]:
    out = list(seq)
    k = _portion(ratio, len(out))
    if k:
        for p in rng.choice(len(out), size=k, replace=False):
            out[p] = mask_index
    return out


def crop(seq: Sequence[int], keep_ratio: float, rng: np.random.Generator) -> list[int]:
    n = len(seq)
    length = max(1, _portion(keep_ratio, n))
    start = int(rng.integers(0, n - length + 1))
    return list(seq[start : start + length])


def reorder(seq: Sequence[int], ratio: float, rng: np.random.Generator) -> list[int]:
    out = list(seq)
    length = _portion(ratio, len(out))
    if length < 2:
        return out
    start = int(rng.integers(0, len(out) - length + 1))
    segment = out[start : start + length]
    out[start : start + length] = [segment[i] for i in rng.permutation(length)]
    return out


def apply_operator(name: str, seq, cfg: AugmentConfig, mask_index: int, rng) -> list[int]:
    if name == "mask":
        return mask(seq, cfg.mask_ratio, mask_index, rng)
    if name == "crop":
        return crop(seq, cfg.crop_keep_ratio, rng)
    if name == "reorder":
        return reorder(seq, cfg.reorder_ratio, rng)
    raise ValueError(f"unknown augmentation {name!r}")


def draw_operators(rng: np.random.Generator) -> tuple[str, str]:
    """Ordered pair of two different operators, each of the 6 pairs equally likely."""
    first, second = rng.choice(len(OPERATORS), size=2, replace=False)
    return OPERATORS[first], OPERATORS[second]


def augment_pair(
    seq: Sequence[int], cfg: AugmentConfig, mask_index: int, rng: np.random.Generator
) -> tuple[list[int], list[int]]:
    if not len(seq):
        raise ValueError("cannot augment an empty sequence")
    g1, g2 = draw_operators(rng)
    return apply_operator(g1, seq, cfg, mask_index, rng), apply_operator(g2, seq, cfg, mask_index, rng)
