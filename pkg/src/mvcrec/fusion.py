"""Global/local attention gate that fuses the ID-view and graph-view representations."""

from __future__ import annotations

import torch
from torch import nn
from torch.nn import functional as F

from .encoders import init_normal_, named_generator


def attention_gate(a: torch.Tensor, b: torch.Tensor, w_global: torch.Tensor, w_local: torch.Tensor) -> torch.Tensor:
    """``sigmoid(mean(a + b) * W_g + relu((a + b) W_l))``, shape ``(..., d)``.

    The scalar global score is broadcast over the ``d`` local scores.
    """
    u = a + b
    s_global = u.mean(dim=-1, keepdim=True) * w_global.reshape(())
    s_local = F.relu(u @ w_local)
    return torch.sigmoid(s_global + s_local)


def fuse(x: torch.Tensor, y: torch.Tensor, gate: torch.Tensor) -> torch.Tensor:
    """``gate * y + (1 - gate) * x``; the gate weights the second argument."""
    return gate * y + (1.0 - gate) * x


class AttentionFusion(nn.Module):
    def __init__(self, d: int):
        super().__init__()
        self.w_global = nn.Parameter(torch.empty(1, 1))
        self.w_local = nn.Parameter(torch.empty(d, d))

    def reset_parameters(self, seed: int, prefix: str = "fusion") -> None:
        init_normal_(self.w_global, named_generator(seed, f"{prefix}.w_global"))
        init_normal_(self.w_local, named_generator(seed, f"{prefix}.w_local"))

    def gate(self, a, b):
        return attention_gate(a, b, self.w_global, self.w_local)

    def forward(self, h_s: torch.Tensor, h_g: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Return ``(fuse(h_s, h_g), fuse(h_g, h_s))`` from a single gate evaluation."""
        s = self.gate(h_s, h_g)
        return fuse(h_s, h_g, s), fuse(h_g, h_s, s)


class MLPFusion(nn.Module):
    """Concatenate both views and map ``2d -> d -> d`` (ReLU between the layers)."""

    def __init__(self, d: int):
        super().__init__()
        self.hidden = nn.Linear(2 * d, d)
        self.output = nn.Linear(d, d)

    def reset_parameters(self, seed: int, prefix: str = "mlp") -> None:
        for name, p in self.named_parameters():
            if name.endswith("bias"):
                nn.init.zeros_(p)
            else:
                init_normal_(p, named_generator(seed, f"{prefix}.{name}"))

    def mix(self, x, y):
        return self.output(F.relu(self.hidden(torch.cat([x, y], dim=-1))))

    def forward(self, h_s, h_g):
        return self.mix(h_s, h_g), self.mix(h_g, h_s)


def predict_scores(
    h_s: torch.Tensor,
    h_g: torch.Tensor,
    item_table: torch.Tensor,
    graph_table: torch.Tensor,
    fusion: nn.Module,
) -> torch.Tensor:
    """Scores over real items: ``fuse(h_s, h_g) M_s^T + fuse(h_g, h_s) M_g^T``.

    Tables are the real-item rows only (``num_items x d``).
    """
    if item_table.shape != graph_table.shape or item_table.shape[-1] != h_s.shape[-1]:
        raise ValueError(
            f"dimension mismatch: h {tuple(h_s.shape)}, M_s {tuple(item_table.shape)}, M_g {tuple(graph_table.shape)}"
        )
    first, second = fusion(h_s, h_g)
    return first @ item_table.T + second @ graph_table.T
