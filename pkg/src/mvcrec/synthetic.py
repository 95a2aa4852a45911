"""Small synthetic datasets and the tiny-model gradient check."""

from __future__ import annotations

import numpy as np
import torch

from .augmentation import augment_pair, sequence_rng
from .config import TrainConfig
from .corpus import Interaction, InteractionLog
from .encoders import GradCheckReport, gradient_check
from .item_graph import build_graph
from .model import MVCRec
from .trainer import aug_config


def cyclic_log(num_users: int = 200, num_items: int = 50, min_len: int = 8, max_len: int = 16, seed: int = 0) -> InteractionLog:
    """Every user walks the item cycle ``i -> i + 1 (mod num_items)`` from a random start."""
    rng = np.random.default_rng(seed)
    log = []
    for u in range(num_users):
        start = int(rng.integers(num_items))
        length = int(rng.integers(min_len, max_len + 1))
        for t in range(length):
            item = (start + t) % num_items
            log.append(Interaction(f"u{u:04d}", f"i{item:03d}", 1_000_000 + 60 * t))
    return sorted(log, key=lambda r: (r.user_id, r.timestamp))


def gradcheck_tiny(
    num_items: int = 30,
    d: int = 8,
    max_len: int = 6,
    batch_size: int = 4,
    gcn_layers: int = 2,
    gcn_normalize: bool = False,
    lam: float = 0.1,
    variant: str = "full",
    num_samples: int = 200,
    eps: float = 1e-6,
    tol: float = 1e-4,
    seed: int = 0,
) -> GradCheckReport:
    """Finite-difference check of the total training loss on a random tiny model."""
    rng = np.random.default_rng(seed)
    train = [list(rng.integers(1, num_items + 1, size=int(rng.integers(3, 2 * max_len)))) for _ in range(3 * batch_size)]
    graph = build_graph(train, num_items, z=3)
    cfg = TrainConfig(
        d=d,
        max_len=max_len,
        batch_size=batch_size,
        gcn_layers=gcn_layers,
        gcn_normalize=gcn_normalize,
        lam=lam,
        dropout=0.0,
        variant=variant,
        seed=seed,
    )
    model = MVCRec(num_items, graph, cfg).double()
    model.eval()
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in model.named_parameters():
            # larger than the training init so the check sees a nonlinear regime
            noise = 0.3 * torch.randn(p.shape, generator=gen, dtype=p.dtype)
            p.copy_(1.0 + noise if ".norm" in name and name.endswith("weight") else noise)
        model.item_emb[0].zero_()
        model.graph_base[0].zero_()

    batch = train[:batch_size]
    aug = aug_config(cfg)
    views = [augment_pair(seq[:-1], aug, num_items + 1, sequence_rng(seed, u, 0)) for u, seq in enumerate(batch)]
    view1 = [v[0] for v in views]
    view2 = [v[1] for v in views]
    targets = torch.tensor([seq[-1] for seq in batch])

    def loss_fn():
        return model.losses(view1, view2, targets).total

    return gradient_check(loss_fn, dict(model.named_parameters()), eps=eps, tol=tol, num_samples=num_samples, seed=seed)
