"""Full-item ranking with HR@k / NDCG@k."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import torch

KS = (5, 10, 20)


def rank_target(scores, target: int, history: Iterable[int] = (), exclude_history: bool = False) -> int:
    """1-based rank of ``target`` among all items; ties go to the lower item index.

    ``scores[j]`` is the score of item ``j + 1``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    n = scores.shape[0]
    if not 1 <= target <= n:
        raise ValueError(f"target {target} outside 1..{n}")
    if exclude_history:
        scores = scores.copy()
        drop = [h - 1 for h in history if h != target and 1 <= h <= n]
        scores[drop] = -np.inf
    t = scores[target - 1]
    return int(1 + np.sum(scores > t) + np.sum(scores[: target - 1] == t))


def rank_targets(scores: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Batched :func:`rank_target` without history exclusion."""
    targets = torch.as_tensor(targets, dtype=torch.long)
    t = scores.gather(1, (targets - 1)[:, None])
    col = torch.arange(scores.shape[1], device=scores.device)[None, :]
    ahead = (scores > t) | ((scores == t) & (col < (targets - 1)[:, None]))
    return 1 + ahead.sum(dim=1)


def hr_at_k(ranks: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = np.asarray(ranks)
    if ranks.size == 0:
        raise ValueError("no ranks to aggregate")
    return float(np.mean(ranks <= k))


def ndcg_at_k(ranks: Sequence[int], k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    ranks = np.asarray(ranks, dtype=np.float64)
    if ranks.size == 0:
        raise ValueError("no ranks to aggregate")
    gains = np.where(ranks <= k, 1.0 / np.log2(ranks + 1.0), 0.0)
    return float(np.mean(gains))


@dataclass
class MetricReport:
    metrics: dict[str, float]
    num_users: int
    split: str = ""
    epoch: int | None = None

    def __getitem__(self, key):
        return self.metrics[key]

    def to_json(self) -> dict:
        out = {"split": self.split, "epoch": self.epoch}
        out.update(self.metrics)
        out["users"] = self.num_users
        return out


def report_from_ranks(ranks, split: str = "", epoch: int | None = None, ks=KS) -> MetricReport:
    metrics = {}
    for k in ks:
        metrics[f"HR@{k}"] = hr_at_k(ranks, k)
    for k in ks:
        metrics[f"NDCG@{k}"] = ndcg_at_k(ranks, k)
    return MetricReport(metrics, len(ranks), split, epoch)


def evaluate(
    scorer: Callable[[list[list[int]]], torch.Tensor],
    instances: Sequence[tuple[Sequence[int], int]],
    split: str = "",
    epoch: int | None = None,
    batch_size: int = 512,
    exclude_history: bool = False,
) -> MetricReport:
    """Rank every user's target against the full item set.

    ``scorer`` maps a list of input prefixes to a ``(B, num_items)`` score tensor.
    """
    if not len(instances):
        raise ValueError("empty split")
    ranks = []
    with torch.no_grad():
        for start in range(0, len(instances), batch_size):
            chunk = instances[start : start + batch_size]
            inputs = [list(seq) for seq, _ in chunk]
            targets = torch.tensor([t for _, t in chunk], dtype=torch.long)
            scores = scorer(inputs).to(torch.float64)
            if exclude_history:
                ranks.extend(
                    rank_target(s, int(t), seq, exclude_history=True)
                    for s, t, seq in zip(scores.numpy(), targets, inputs)
                )
            else:
                ranks.extend(rank_targets(scores, targets).tolist())
    return report_from_ranks(ranks, split, epoch)

