"""Checkpoint container.

A checkpoint is a safetensors file: an 8-byte little-endian header length, a
JSON header listing every tensor's dtype, shape and byte range, then the raw
little-endian tensor data. Tensor names:

* ``param/<name>``: model parameters (``item_emb``, ``encoder_s.blocks.0...``)
* ``optim/<name>/exp_avg`` and ``optim/<name>/exp_avg_sq``: Adam moments
* ``graph/edges``: int64 ``(E, 2)`` item graph edge list (``i < j``)

The header's ``__metadata__`` holds string values: ``format`` (always
``mvcrec-checkpoint``), ``version``, ``config`` (the flat TrainConfig JSON),
``num_items``, ``epoch``, ``best_metric`` and ``optim_steps`` (JSON map from
parameter name to Adam step count).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import torch
from safetensors.torch import load_file, save_file

from .config import TrainConfig
from .item_graph import ItemGraph
from .model import MVCRec

FORMAT = "mvcrec-checkpoint"
VERSION = 1


@dataclass
class Checkpoint:
    config: TrainConfig
    num_items: int
    params: dict[str, torch.Tensor]
    graph_edges: torch.Tensor
    epoch: int = 0
    best_metric: float = float("nan")
    optimizer: dict[str, dict[str, torch.Tensor]] = field(default_factory=dict)
    optim_steps: dict[str, float] = field(default_factory=dict)

    def build_model(self) -> MVCRec:
        """Rebuild the model in eval mode; call ``.train()`` to resume training."""
        graph = ItemGraph(self.num_items, self.graph_edges.numpy())
        model = MVCRec(self.num_items, graph, self.config)
        model.load_state_dict(self.params)
        return model.eval()


def snapshot(model: MVCRec, optimizer: torch.optim.Optimizer | None = None, epoch=0, best_metric=float("nan")):
    params = {k: v.detach().clone() for k, v in model.state_dict().items()}
    moments, steps = {}, {}
    if optimizer is not None:
        names = {id(p): n for n, p in model.named_parameters()}
        for p, state in optimizer.state.items():
            name = names[id(p)]
            moments[name] = {k: state[k].detach().clone() for k in ("exp_avg", "exp_avg_sq")}
            steps[name] = float(state["step"])
    return Checkpoint(
        config=model.cfg,
        num_items=model.num_items,
        params=params,
        graph_edges=torch.from_numpy(model.graph.edges.copy()),
        epoch=epoch,
        best_metric=best_metric,
        optimizer=moments,
        optim_steps=steps,
    )


def restore_optimizer(ckpt: Checkpoint, model: MVCRec, optimizer: torch.optim.Optimizer) -> None:
    params = dict(model.named_parameters())
    for name, moments in ckpt.optimizer.items():
        state = optimizer.state[params[name]]
        state["step"] = torch.tensor(ckpt.optim_steps[name])
        state["exp_avg"] = moments["exp_avg"].clone()
        state["exp_avg_sq"] = moments["exp_avg_sq"].clone()


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    tensors = {f"param/{k}": v.contiguous() for k, v in ckpt.params.items()}
    for name, moments in ckpt.optimizer.items():
        for key, value in moments.items():
            tensors[f"optim/{name}/{key}"] = value.contiguous()
    tensors["graph/edges"] = ckpt.graph_edges.to(torch.int64).reshape(-1, 2).contiguous()
    metadata = {
        "format": FORMAT,
        "version": str(VERSION),
        "config": ckpt.config.to_json(),
        "num_items": str(ckpt.num_items),
        "epoch": str(ckpt.epoch),
        "best_metric": repr(float(ckpt.best_metric)),
        "optim_steps": json.dumps(ckpt.optim_steps, sort_keys=True),
    }
    save_file(tensors, str(path), metadata=metadata)


def load_checkpoint(path) -> Checkpoint:
    from safetensors import safe_open

    with safe_open(str(path), framework="pt") as fh:
        metadata = fh.metadata() or {}
    if metadata.get("format") != FORMAT:
        raise ValueError(f"{path} is not an {FORMAT} file")
    if int(metadata["version"]) > VERSION:
        raise ValueError(f"checkpoint version {metadata['version']} is newer than supported ({VERSION})")
    raw = load_file(str(path))
    params, moments = {}, {}
    for key, value in raw.items():
        kind, _, rest = key.partition("/")
        if kind == "param":
            params[rest] = value
        elif kind == "optim":
            name, _, moment = rest.rpartition("/")
            moments.setdefault(name, {})[moment] = value
    return Checkpoint(
        config=TrainConfig.from_dict(json.loads(metadata["config"])),
        num_items=int(metadata["num_items"]),
        params=params,
        graph_edges=raw["graph/edges"],
        epoch=int(metadata["epoch"]),
        best_metric=float(metadata["best_metric"]),
        optimizer=moments,
        optim_steps=json.loads(metadata["optim_steps"]),
    )
