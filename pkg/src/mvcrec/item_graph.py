"""Item co-occurrence graph and parameter-free GCN propagation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import torch


@dataclass
class ItemGraph:
    """Undirected, unweighted graph over item indices ``1..num_items``.

    ``edges`` is an ``(E, 2)`` int array with ``i < j`` on every row, sorted.
    """

    num_items: int
    edges: np.ndarray

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if len(self.edges):
            if (self.edges[:, 0] >= self.edges[:, 1]).any():
                raise ValueError("edges must satisfy i < j")
            if self.edges.min() < 1 or self.edges.max() > self.num_items:
                raise ValueError("edge endpoint out of range")

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def neighbors(self) -> list[list[int]]:
        """Neighbor lists indexed by item index (entry 0 is unused)."""
        adj: list[list[int]] = [[] for _ in range(self.num_items + 1)]
        for i, j in self.edges.tolist():
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.num_items + 1, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency(self, normalize: bool = False, dtype=torch.float32) -> torch.Tensor:
        """Sparse ``num_items x num_items`` adjacency on 0-based node ids (item index - 1)."""
        n = self.num_items
        if not len(self.edges):
            return torch.sparse_coo_tensor(
                torch.zeros(2, 0, dtype=torch.long), torch.zeros(0, dtype=dtype), (n, n), check_invariants=False
            ).coalesce()
        src = np.concatenate([self.edges[:, 0], self.edges[:, 1]]) - 1
        dst = np.concatenate([self.edges[:, 1], self.edges[:, 0]]) - 1
        values = np.ones(len(src), dtype=np.float64)
        if normalize:
            deg = self.degrees()[1:].astype(np.float64)
            values = values / np.sqrt(deg[src] * deg[dst])
        index = torch.from_numpy(np.stack([src, dst]))
        return torch.sparse_coo_tensor(
            index, torch.from_numpy(values).to(dtype), (n, n), check_invariants=False
        ).coalesce()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, j in self.edges.tolist():
                fh.write(f"{i} {j}\n")

    @classmethod
    def load(cls, path, num_items: int) -> "ItemGraph":
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    i, j = map(int, line.split())
                except ValueError:
                    raise ValueError(f"{path} line {lineno}: expected 'i j'") from None
                pairs.append((min(i, j), max(i, j)))
        return cls(num_items, np.array(sorted(set(pairs)), dtype=np.int64).reshape(-1, 2))


def build_graph(train_sequences: Iterable[Sequence[int]], num_items: int, z: int = 3) -> ItemGraph:
    """Link every pair of distinct items that sit fewer than ``z`` positions apart."""
    pairs: set[tuple[int, int]] = set()
    for seq in train_sequences:
        items = getattr(seq, "items", seq)
        n = len(items)
        for p in range(n):
            a = items[p]
            for q in range(p + 1, min(n, p + z)):
                b = items[q]
                if a != b:
                    pairs.add((a, b) if a < b else (b, a))
    edges = np.array(sorted(pairs), dtype=np.int64).reshape(-1, 2)
    return ItemGraph(num_items, edges)


@dataclass
class PropagationConfig:
    num_layers: int = 2
    normalize: bool = False

    def __post_init__(self):
        if self.num_layers < 0:
            raise ValueError("num_layers must be >= 0")


def propagate(graph, base: torch.Tensor, cfg: PropagationConfig | int = PropagationConfig()) -> torch.Tensor:
    """Layer-sum propagation with self retention.

    ``graph`` is an :class:`ItemGraph` or a prebuilt sparse adjacency from
    :meth:`ItemGraph.adjacency` (which already carries the normalization).
    ``base`` has ``num_items + 2`` rows (padding first, mask last); only the item
    rows are propagated, the two special rows are passed through unchanged.
    ``m^{l+1} = m^l + A m^l`` and the output is ``sum_{l=0..L} m^l``.
    """
    if isinstance(cfg, int):
        cfg = PropagationConfig(num_layers=cfg)
    if isinstance(graph, ItemGraph):
        adjacency = graph.adjacency(normalize=cfg.normalize, dtype=base.dtype)
    else:
        adjacency = graph
    n = adjacency.shape[0]
    if base.dim() != 2 or base.shape[0] != n + 2:
        raise ValueError(f"base table has shape {tuple(base.shape)}, expected ({n + 2}, d)")
    if adjacency.dtype != base.dtype:
        adjacency = adjacency.to(base.dtype)
    layer = base[1 : n + 1]
    total = layer
    for _ in range(cfg.num_layers):
        layer = layer + torch.sparse.mm(adjacency, layer)
        total = total + layer
    return torch.cat([base[:1], total, base[n + 1 :]], dim=0)
