"""The two-view sequential recommender assembled from its parts."""

from __future__ import annotations

from typing import Sequence

import torch
from torch import nn

from .config import TrainConfig
from .encoders import SequenceEncoder, embed_input, init_normal_, last_position, named_generator, pad_batch
from .fusion import AttentionFusion, MLPFusion, predict_scores
from .item_graph import ItemGraph, PropagationConfig, propagate
from .objectives import LossBreakdown, cross_view_loss, inner_view_loss_single, pair_means, rec_loss, total_loss


class MVCRec(nn.Module):
    """ID view + graph view encoders, contrastive losses and the fusion scorer.

    Tables have ``num_items + 2`` rows: 0 is padding, ``num_items + 1`` is the
    mask token. ``variant`` switches off one view (``s_only`` / ``g_only``) or
    swaps the attention fusion for an MLP (``mlp_fusion``).
    """

    def __init__(self, num_items: int, graph: ItemGraph, cfg: TrainConfig):
        super().__init__()
        if graph.num_items != num_items:
            raise ValueError("graph and vocabulary disagree on the number of items")
        self.num_items = num_items
        self.cfg = cfg
        self.graph = graph
        self.propagation = PropagationConfig(cfg.gcn_layers, cfg.gcn_normalize)
        self._adjacency = graph.adjacency(normalize=cfg.gcn_normalize)

        d = cfg.d
        self.item_emb = nn.Parameter(torch.empty(num_items + 2, d))
        self.graph_base = nn.Parameter(torch.empty(num_items + 2, d))
        self.position = nn.Parameter(torch.empty(cfg.max_len, d))
        enc = dict(blocks=cfg.blocks, heads=cfg.heads, dropout=cfg.dropout, ffn_mult=cfg.ffn_mult)
        self.encoder_s = SequenceEncoder(d, **enc)
        self.encoder_g = SequenceEncoder(d, **enc)
        if cfg.variant == "full":
            self.fusion = AttentionFusion(d)
        elif cfg.variant == "mlp_fusion":
            self.fusion = MLPFusion(d)
        else:
            self.fusion = None
        self.input_dropout = nn.Dropout(cfg.dropout)
        self.reset_parameters(cfg.seed)

    @property
    def uses_id_view(self) -> bool:
        return self.cfg.variant != "g_only"

    @property
    def uses_graph_view(self) -> bool:
        return self.cfg.variant != "s_only"

    def reset_parameters(self, seed: int) -> None:
        for name in ("item_emb", "graph_base", "position"):
            init_normal_(getattr(self, name), named_generator(seed, name))
        with torch.no_grad():
            self.item_emb[0].zero_()
            self.graph_base[0].zero_()
        self.encoder_s.reset_parameters(seed, "encoder_s")
        self.encoder_g.reset_parameters(seed, "encoder_g")
        if self.fusion is not None:
            self.fusion.reset_parameters(seed)

    def _apply(self, fn, *args, **kwargs):
        # keep the sparse adjacency in the parameters' dtype (e.g. after .double())
        out = super()._apply(fn, *args, **kwargs)
        self._adjacency = self._adjacency.to(self.item_emb.dtype)
        return out

    # -- building blocks -------------------------------------------------

    def graph_table(self) -> torch.Tensor:
        return propagate(self._adjacency, self.graph_base, self.propagation)

    def tables(self) -> dict[str, torch.Tensor]:
        out = {}
        if self.uses_id_view:
            out["s"] = self.item_emb
        if self.uses_graph_view:
            out["g"] = self.graph_table()
        return out

    def encode(self, view: str, sequences: Sequence[Sequence[int]], table: torch.Tensor, keep_weights=False):
        batch = pad_batch(sequences, self.cfg.max_len)
        e = self.input_dropout(embed_input(batch, table, self.position))
        encoder = self.encoder_s if view == "s" else self.encoder_g
        return last_position(encoder(e, batch.mask, keep_weights))

    def scores_from(self, reps: dict[str, torch.Tensor], tables: dict[str, torch.Tensor]) -> torch.Tensor:
        items = slice(1, self.num_items + 1)
        if self.fusion is None:
            (view,) = reps
            return reps[view] @ tables[view][items].T
        return predict_scores(reps["s"], reps["g"], tables["s"][items], tables["g"][items], self.fusion)

    # -- training and inference -------------------------------------------

    def losses(
        self,
        view1: Sequence[Sequence[int]],
        view2: Sequence[Sequence[int]],
        targets: torch.Tensor,
        lam: float | None = None,
    ) -> LossBreakdown:
        lam = self.cfg.lam if lam is None else lam
        B = len(view1)
        tables = self.tables()
        means, inner = {}, 0.0
        for view, table in tables.items():
            h = self.encode(view, list(view1) + list(view2), table)
            h1, h2 = h[:B], h[B:]
            inner = inner + inner_view_loss_single(h1, h2)
            means[view] = pair_means(h1, h2)
        if len(means) == 2:
            cross = cross_view_loss(means["s"], means["g"], self.cfg.cross_negatives)
        else:
            cross = torch.zeros((), dtype=self.item_emb.dtype)
        rec = rec_loss(self.scores_from(means, tables), targets)
        return total_loss(rec, inner, cross, lam)

    def score(self, sequences: Sequence[Sequence[int]]) -> torch.Tensor:
        """Scores over items ``1..num_items`` for raw (unaugmented) input prefixes."""
        tables = self.tables()
        reps = {view: self.encode(view, sequences, table) for view, table in tables.items()}
        return self.scores_from(reps, tables)

    def view_parameters(self) -> dict[str, list[str]]:
        """Parameter names owned by each view (for untouched-parameter checks)."""
        names = [n for n, _ in self.named_parameters()]
        return {
            "s": [n for n in names if n == "item_emb" or n.startswith("encoder_s.")],
            "g": [n for n in names if n == "graph_base" or n.startswith("encoder_g.")],
        }
