"""Contrastive, recommendation and total training losses.

Similarities are raw inner products (temperature 1, no normalization) and
every loss is averaged over the users in the batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch
from torch.nn import functional as F

CROSS_NEGATIVE_MODES = ("cross", "same", "union")


def info_nce(h1: torch.Tensor, h2: torch.Tensor, negs: Sequence[torch.Tensor] | torch.Tensor) -> torch.Tensor:
    """Symmetric InfoNCE of one positive pair against a shared negative set."""
    negs = torch.stack(list(negs)) if not torch.is_tensor(negs) else negs
    if negs.dim() != 2 or negs.shape[0] == 0:
        raise ValueError("info_nce needs at least one negative")
    pos = h1 @ h2
    first = torch.logsumexp(torch.cat([pos[None], negs @ h1]), 0) - pos
    second = torch.logsumexp(torch.cat([pos[None], negs @ h2]), 0) - pos
    return first + second


def _check_batch(h: torch.Tensor) -> None:
    if h.shape[0] < 2:
        raise ValueError("contrastive losses need a batch of at least 2 sequences")


def inner_view_loss_single(h1: torch.Tensor, h2: torch.Tensor) -> torch.Tensor:
    """Batch mean of the pair loss within one view.

    The negatives of either member of user b's pair are the ``2(B-1)``
    augmented representations of the other users.
    """
    _check_batch(h1)
    B = h1.shape[0]
    z = torch.cat([h1, h2], dim=0)
    sim = z @ z.T
    user = torch.arange(2 * B, device=z.device) % B
    partner = (torch.arange(2 * B, device=z.device) + B) % (2 * B)
    same_user = user[:, None] == user[None, :]
    keep = ~same_user
    keep[torch.arange(2 * B), partner] = True
    logits = sim.masked_fill(~keep, float("-inf"))
    per_anchor = torch.logsumexp(logits, dim=1) - sim[torch.arange(2 * B), partner]
    return per_anchor.sum() / B


def inner_view_loss(h_s1, h_s2, h_g1, h_g2) -> torch.Tensor:
    return inner_view_loss_single(h_s1, h_s2) + inner_view_loss_single(h_g1, h_g2)


def pair_means(h1: torch.Tensor, h2: torch.Tensor) -> torch.Tensor:
    return (h1 + h2) / 2


def cross_view_loss(hs_m: torch.Tensor, hg_m: torch.Tensor, negatives: str = "cross") -> torch.Tensor:
    """Batch mean of the pair loss between the two views' pair means.

    ``negatives`` picks the B-1 negatives per anchor: ``cross`` uses the other
    users' means from the opposite view, ``same`` from the anchor's own view,
    ``union`` both (2(B-1) negatives).
    """
    _check_batch(hs_m)
    if negatives not in CROSS_NEGATIVE_MODES:
        raise ValueError(f"unknown negative mode {negatives!r}")
    B = hs_m.shape[0]
    eye = torch.eye(B, dtype=torch.bool, device=hs_m.device)
    cross = hs_m @ hg_m.T  # cross[i, j] = s(hs_i, hg_j)
    pos = torch.diagonal(cross)

    def term(anchor, own, opposite):
        sim_opp = anchor @ opposite.T
        sim_own = (anchor @ own.T).masked_fill(eye, float("-inf"))
        if negatives == "cross":
            logits = sim_opp
        elif negatives == "same":
            logits = torch.where(eye, sim_opp, sim_own)
        else:
            logits = torch.cat([sim_opp, sim_own], dim=1)
        return torch.logsumexp(logits, dim=1) - pos

    return (term(hs_m, hs_m, hg_m) + term(hg_m, hg_m, hs_m)).mean()


def rec_loss(scores: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Cross-entropy over real items; ``scores[:, j]`` belongs to item ``j + 1``."""
    targets = torch.as_tensor(targets, dtype=torch.long)
    num_items = scores.shape[-1]
    if targets.numel() and (targets.min() < 1 or targets.max() > num_items):
        raise ValueError(f"target outside 1..{num_items}")
    return F.cross_entropy(scores, targets - 1)


def _scalar(v):
    return v.detach() if torch.is_tensor(v) else v


@dataclass
class LossBreakdown:
    rec: torch.Tensor | float
    inner: torch.Tensor | float
    cross: torch.Tensor | float
    mm: torch.Tensor | float
    total: torch.Tensor | float
    lam: float

    def as_dict(self) -> dict[str, float]:
        return {k: float(_scalar(getattr(self, k))) for k in ("rec", "inner", "cross", "mm", "total")} | {"lambda": self.lam}


def total_loss(rec, inner, cross, lam: float) -> LossBreakdown:
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    mm = inner + cross
    return LossBreakdown(rec=rec, inner=inner, cross=cross, mm=mm, total=rec + lam * mm, lam=lam)
