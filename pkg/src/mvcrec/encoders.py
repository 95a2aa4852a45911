"""Item/position tables, bidirectional transformer encoders and gradient checking."""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

INIT_STD = 0.02


class NonFiniteError(FloatingPointError):
    pass


def named_generator(seed: int, name: str) -> torch.Generator:
    """Generator keyed on (seed, parameter name) so equal-shaped tables match across models."""
    g = torch.Generator()
    g.manual_seed((seed * 1_000_003 + zlib.crc32(name.encode())) % (2**63))
    return g


def init_normal_(tensor: torch.Tensor, generator: torch.Generator) -> torch.Tensor:
    with torch.no_grad():
        return nn.init.trunc_normal_(tensor, std=INIT_STD, a=-2 * INIT_STD, b=2 * INIT_STD, generator=generator)


@dataclass
class SequenceBatch:
    """Left-padded, right-aligned index matrix plus a real-position mask."""

    indices: torch.Tensor  # (B, n) long
    mask: torch.Tensor  # (B, n) bool, True at real positions

    @property
    def shape(self):
        return tuple(self.indices.shape)


def pad_batch(sequences: Sequence[Sequence[int]], width: int) -> SequenceBatch:
    """Keep the last ``width`` items of each sequence and left-pad with 0."""
    out = np.zeros((len(sequences), width), dtype=np.int64)
    for b, seq in enumerate(sequences):
        if not len(seq):
            raise ValueError(f"sequence {b} is empty; the last position must hold an item")
        tail = list(seq)[-width:]
        out[b, width - len(tail) :] = tail
    indices = torch.from_numpy(out)
    return SequenceBatch(indices, indices != 0)


def embed_input(batch: SequenceBatch, table: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
    """``e[b, t] = table[idx[b, t]] + positions[t]``.

    Positions are counted from the right edge, so a batch narrower than the
    position table uses its last rows and the final item always gets ``P[n-1]``.
    """
    idx = batch.indices
    if idx.numel() and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError("item index out of range for embedding table")
    width = idx.shape[1]
    if width > positions.shape[0]:
        raise ValueError(f"batch width {width} exceeds position table length {positions.shape[0]}")
    return table[idx] + positions[positions.shape[0] - width :]


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d: int, heads: int, dropout: float):
        super().__init__()
        if d % heads:
            raise ValueError(f"heads ({heads}) must divide d ({d})")
        self.d, self.heads = d, heads
        self.query = nn.Linear(d, d)
        self.key = nn.Linear(d, d)
        self.value = nn.Linear(d, d)
        self.out = nn.Linear(d, d)
        self.attn_dropout = nn.Dropout(dropout)
        self.last_weights: torch.Tensor | None = None

    def forward(self, x: torch.Tensor, mask: torch.Tensor, keep_weights: bool = False) -> torch.Tensor:
        B, n, d = x.shape
        h = self.heads

        def split(t):
            return t.view(B, n, h, d // h).transpose(1, 2)

        q, k, v = split(self.query(x)), split(self.key(x)), split(self.value(x))
        logits = q @ k.transpose(-1, -2) / math.sqrt(d // h)
        logits = logits.masked_fill(~mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(logits, dim=-1)
        if keep_weights:
            self.last_weights = weights.detach()
        ctx = self.attn_dropout(weights) @ v
        return self.out(ctx.transpose(1, 2).reshape(B, n, d))


class TransformerBlock(nn.Module):
    """Post-norm block: ``LN(H + MHA(H))`` then ``LN(H + FFN(H))``."""

    def __init__(self, d: int, heads: int, dropout: float, ffn_mult: int = 4):
        super().__init__()
        self.attention = MultiHeadSelfAttention(d, heads, dropout)
        self.norm1 = nn.LayerNorm(d, eps=1e-12)
        self.ffn_in = nn.Linear(d, ffn_mult * d)
        self.ffn_out = nn.Linear(ffn_mult * d, d)
        self.norm2 = nn.LayerNorm(d, eps=1e-12)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, mask, keep_weights=False):
        x = self.norm1(x + self.dropout(self.attention(x, mask, keep_weights)))
        ffn = self.ffn_out(self.dropout(F.gelu(self.ffn_in(x))))
        return self.norm2(x + self.dropout(ffn))


class SequenceEncoder(nn.Module):
    """Stack of non-causal transformer blocks over padded sequences."""

    def __init__(self, d: int, blocks: int = 2, heads: int = 2, dropout: float = 0.2, ffn_mult: int = 4):
        super().__init__()
        self.blocks = nn.ModuleList(TransformerBlock(d, heads, dropout, ffn_mult) for _ in range(blocks))

    def forward(self, e: torch.Tensor, mask: torch.Tensor, keep_weights: bool = False) -> torch.Tensor:
        h = e
        for i, block in enumerate(self.blocks):
            h = block(h, mask, keep_weights)
            if not torch.isfinite(h).all():
                raise NonFiniteError(f"non-finite activations after encoder block {i}")
        return h

    def reset_parameters(self, seed: int, prefix: str) -> None:
        for name, p in self.named_parameters():
            if name.endswith("bias"):
                nn.init.zeros_(p)
            elif ".norm" in name:
                nn.init.ones_(p)
            else:
                init_normal_(p, named_generator(seed, f"{prefix}.{name}"))


def last_position(h: torch.Tensor) -> torch.Tensor:
    """Representation at the right-most (always real) position."""
    return h[:, -1, :]


# ---------------------------------------------------------------------------
# finite-difference verification


@dataclass
class GradCheckEntry:
    name: str
    flat_index: int
    analytic: float
    numeric: float
    rel_error: float
    ok: bool
    roundoff_limited: bool = False


@dataclass
class GradCheckReport:
    entries: list[GradCheckEntry] = field(default_factory=list)
    tol: float = 0.0
    roundoff: float = 0.0

    @property
    def failures(self) -> list[GradCheckEntry]:
        return [e for e in self.entries if not e.ok]

    @property
    def passed(self) -> bool:
        return bool(self.entries) and not self.failures

    @property
    def max_rel_error(self) -> float:
        """Largest relative error among entries resolvable above round-off."""
        return max((e.rel_error for e in self.entries if not e.roundoff_limited), default=0.0)

    def groups(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for e in self.entries:
            g = e.name.split(".")[0]
            counts[g] = counts.get(g, 0) + 1
        return counts

    def summary(self) -> str:
        limited = sum(e.roundoff_limited for e in self.entries)
        lines = [
            f"checked {len(self.entries)} parameters in groups {self.groups()}; "
            f"max relative error {self.max_rel_error:.3e} (tol {self.tol:g}); "
            f"{limited} below the round-off floor {self.roundoff:.1e}"
        ]
        for e in self.failures[:20]:
            lines.append(
                f"  MISMATCH {e.name}[{e.flat_index}]: analytic={e.analytic:.10e} numeric={e.numeric:.10e}"
            )
        return "\n".join(lines)


def relative_error(a: float, b: float) -> float:
    scale = max(abs(a), abs(b))
    return abs(a - b) / scale if scale > 0 else 0.0


def gradient_check(
    loss_fn: Callable[[], torch.Tensor],
    params: Mapping[str, torch.Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
    num_samples: int = 200,
    seed: int = 0,
) -> GradCheckReport:
    """Compare autograd against central differences on sampled scalar parameters.

    Samples are spread evenly over parameter groups (the first dotted component
    of each name) so every group is exercised. A central difference cannot
    resolve gradients below ``~|f| * machine_eps / eps``; entries whose absolute
    disagreement is under that floor pass as round-off limited (only when
    ``tol > 0``).
    """
    if not 1e-6 <= eps <= 1e-4:
        raise ValueError("eps must lie in [1e-6, 1e-4]")
    params = dict(params)
    for p in params.values():
        if p.dtype != torch.float64:
            raise TypeError("gradient_check requires double precision parameters")
        p.grad = None
    loss = loss_fn()
    grads = torch.autograd.grad(loss, list(params.values()), allow_unused=True)
    grads = {name: (torch.zeros_like(p) if g is None else g) for (name, p), g in zip(params.items(), grads)}
    roundoff = 8 * np.finfo(np.float64).eps * max(abs(loss.item()), 1.0) / eps

    groups: dict[str, list[str]] = {}
    for name in params:
        groups.setdefault(name.split(".")[0], []).append(name)
    rng = np.random.default_rng(seed)
    per_group = math.ceil(num_samples / len(groups))
    picks: list[tuple[str, int]] = []
    for names in groups.values():
        sizes = np.array([params[n].numel() for n in names], dtype=float)
        chosen = rng.choice(len(names), size=per_group, p=sizes / sizes.sum())
        for c in chosen:
            picks.append((names[c], int(rng.integers(params[names[c]].numel()))))

    report = GradCheckReport(tol=tol, roundoff=roundoff)
    with torch.no_grad():
        for name, idx in picks:
            flat = params[name].view(-1)
            orig = flat[idx].item()
            flat[idx] = orig + eps
            up = loss_fn().item()
            flat[idx] = orig - eps
            down = loss_fn().item()
            flat[idx] = orig
            numeric = (up - down) / (2 * eps)
            analytic = grads[name].view(-1)[idx].item()
            diff = abs(analytic - numeric)
            err = relative_error(analytic, numeric)
            limited = tol > 0 and diff <= roundoff and max(abs(analytic), abs(numeric)) * tol < roundoff
            ok = err < tol or limited if tol > 0 else diff == 0.0
            report.entries.append(GradCheckEntry(name, idx, analytic, numeric, err, ok, limited))
    return report
