"""Training loop with early stopping, plus ablation and sweep drivers."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import torch

from .augmentation import AugmentConfig, augment_pair, sequence_rng
from .checkpoint import Checkpoint, save_checkpoint, snapshot
from .config import VARIANTS, TrainConfig
from .corpus import DatasetSplit
from .encoders import NonFiniteError
from .evaluation import MetricReport, evaluate
from .item_graph import ItemGraph
from .model import MVCRec

logger = logging.getLogger(__name__)

MONITOR = "NDCG@20"


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Instance:
    user: int
    position: int
    inputs: list[int]
    target: int


def make_instances(split: DatasetSplit, max_len: int, sliding_window: bool = False) -> list[Instance]:
    """Next-item training instances from the train part of every user.

    Without ``sliding_window`` each user contributes one instance (last train
    item as target); users whose train part has a single item have no input
    and are skipped.
    """
    out = []
    for u, seq in enumerate(split.train):
        if sliding_window:
            for t in range(1, len(seq)):
                out.append(Instance(u, t, seq[max(0, t - max_len) : t], seq[t]))
        elif len(seq) >= 2:
            out.append(Instance(u, len(seq) - 1, seq[:-1][-max_len:], seq[-1]))
    if not out:
        raise ValueError("no training instances: every train sequence is shorter than 2")
    return out


def epoch_batches(num: int, batch_size: int, seed: int, epoch: int) -> list[np.ndarray]:
    order = np.random.default_rng([seed, epoch, 0x5EED]).permutation(num)
    batches = [order[i : i + batch_size] for i in range(0, num, batch_size)]
    # a batch of one has no in-batch negatives
    if len(batches) > 1 and len(batches[-1]) < 2:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    return batches


def augmented_views(batch: Sequence[Instance], aug: AugmentConfig, mask_index: int, seed: int, epoch: int):
    view1, view2 = [], []
    for inst in batch:
        rng = sequence_rng(seed, inst.user, epoch, inst.position)
        a, b = augment_pair(inst.inputs, aug, mask_index, rng)
        view1.append(a)
        view2.append(b)
    return view1, view2


def aug_config(cfg: TrainConfig) -> AugmentConfig:
    return AugmentConfig(cfg.mask_ratio, cfg.crop_ratio, cfg.reorder_ratio)


def make_optimizer(model: MVCRec, cfg: TrainConfig) -> torch.optim.Adam:
    return torch.optim.Adam(
        model.parameters(), lr=cfg.lr, betas=(0.9, 0.999), eps=1e-8, weight_decay=cfg.weight_decay
    )


def evaluate_model(model: MVCRec, split: DatasetSplit, part: str, epoch=None) -> MetricReport:
    was_training = model.training
    model.eval()
    try:
        return evaluate(
            model.score,
            split.part(part),
            split=part,
            epoch=epoch,
            batch_size=model.cfg.eval_batch_size,
            exclude_history=model.cfg.exclude_history,
        )
    finally:
        model.train(was_training)


@dataclass
class TrainResult:
    model: MVCRec
    checkpoint: Checkpoint
    history: list[dict] = field(default_factory=list)
    test: MetricReport | None = None

    @property
    def best_epoch(self) -> int:
        return self.checkpoint.epoch


def train(
    cfg: TrainConfig,
    split: DatasetSplit,
    graph: ItemGraph,
    out_dir: str | Path | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> TrainResult:
    """Fit a model and return it restored to its best validation epoch."""
    torch.manual_seed(cfg.seed)
    num_items = graph.num_items
    model = MVCRec(num_items, graph, cfg)
    optimizer = make_optimizer(model, cfg)
    params = [p for p in model.parameters()]
    instances = make_instances(split, cfg.max_len, cfg.sliding_window)
    aug = aug_config(cfg)
    mask_index = num_items + 1

    out_dir = Path(out_dir) if out_dir is not None else None
    stream = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        stream = open(out_dir / "metrics.jsonl", "w", encoding="utf-8")

    history: list[dict] = []
    best: Checkpoint | None = None
    best_value = -math.inf
    stale = 0
    try:
        for epoch in range(1, cfg.max_epochs + 1):
            model.train()
            sums = dict.fromkeys(("rec", "inner", "cross", "mm", "total"), 0.0)
            for idx in epoch_batches(len(instances), cfg.batch_size, cfg.seed, epoch):
                batch = [instances[i] for i in idx]
                view1, view2 = augmented_views(batch, aug, mask_index, cfg.seed, epoch)
                targets = torch.tensor([inst.target for inst in batch])
                try:
                    losses = model.losses(view1, view2, targets)
                    if not torch.isfinite(losses.total):
                        raise NonFiniteError(f"loss {losses.as_dict()}")
                except NonFiniteError as err:
                    if out_dir is not None:
                        save_checkpoint(snapshot(model, optimizer, epoch), out_dir / "diverged.ckpt")
                    raise TrainingDiverged(f"non-finite values at epoch {epoch}: {err}") from err
                optimizer.zero_grad(set_to_none=True)
                losses.total.backward()
                if cfg.grad_clip > 0:
                    torch.nn.utils.clip_grad_norm_(params, cfg.grad_clip)
                optimizer.step()
                for k, v in losses.as_dict().items():
                    if k in sums:
                        sums[k] += v * len(batch)

            report = evaluate_model(model, split, "valid", epoch)
            record = {"epoch": epoch, "lambda": cfg.lam}
            record.update({k: v / len(instances) for k, v in sums.items()})
            record["valid"] = report.to_json()
            history.append(record)
            if stream is not None:
                stream.write(json.dumps(record, sort_keys=True) + "\n")
                stream.flush()
            if on_epoch is not None:
                on_epoch(record)
            logger.info("epoch %d loss %.4f valid %s %.4f", epoch, record["total"], MONITOR, report[MONITOR])

            if report[MONITOR] > best_value:
                best_value = report[MONITOR]
                best = snapshot(model, optimizer, epoch, best_value)
                stale = 0
            else:
                stale += 1
                if stale >= cfg.patience:
                    break
    finally:
        if stream is not None:
            stream.close()

    model.load_state_dict(best.params)
    model.eval()
    result = TrainResult(model, best, history)
    result.test = evaluate_model(model, split, "test", best.epoch)
    if out_dir is not None:
        save_checkpoint(best, out_dir / "model.ckpt")
    return result


def ablate(
    cfg: TrainConfig,
    split: DatasetSplit,
    graph: ItemGraph,
    seeds: Sequence[int] = (0,),
    variants: Sequence[str] = VARIANTS,
    part: str = "test",
) -> list[dict]:
    """Train every variant under each seed; one row per (variant, seed)."""
    rows = []
    for variant in variants:
        for seed in seeds:
            res = train(cfg.replace(variant=variant, seed=seed), split, graph)
            report = res.test if part == "test" else evaluate_model(res.model, split, part)
            rows.append(
                {
                    "variant": variant,
                    "seed": seed,
                    "best_epoch": res.best_epoch,
                    "HR@20": report["HR@20"],
                    "NDCG@20": report["NDCG@20"],
                }
            )
            logger.info("ablation %s seed %d: %s", variant, seed, rows[-1])
    return rows


def summarize_ablation(rows: list[dict]) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for variant in dict.fromkeys(r["variant"] for r in rows):
        sel = [r for r in rows if r["variant"] == variant]
        out[variant] = {m: float(np.mean([r[m] for r in sel])) for m in ("HR@20", "NDCG@20")}
    return out


SWEEP_PARAMS = {"lambda": "lam", "batch_size": "batch_size", "d": "d"}


def sweep(
    cfg: TrainConfig,
    split: DatasetSplit,
    graph: ItemGraph,
    param: str,
    values: Sequence,
    seeds: Sequence[int] = (0,),
) -> list[dict]:
    if param not in SWEEP_PARAMS:
        raise ValueError(f"sweep parameter must be one of {sorted(SWEEP_PARAMS)}")
    if not len(values):
        raise ValueError("empty sweep grid")
    rows = []
    for value in values:
        for seed in seeds:
            res = train(cfg.replace(**{SWEEP_PARAMS[param]: value, "seed": seed}), split, graph)
            rows.append(
                {"param": param, "value": value, "seed": seed, "NDCG@20": res.test["NDCG@20"], "HR@20": res.test["HR@20"]}
            )
    return rows
