"""Transformer encoder for token tagging, written against plain torch ops.

Attention probabilities never see dropout, so every non-padded query row is
an exact distribution; dropout applies to sublayer outputs only.
"""

from __future__ import annotations

import math

import torch
from torch import nn

from ..embeddings import WordVectorTable
from ..errors import ConfigError
from .data import TokenVocab


def sinusoidal_positions(max_len: int, dim: int) -> torch.Tensor:
    """The fixed sine/cosine position table, shape (max_len, dim)."""
    position = torch.arange(max_len, dtype=torch.float64).unsqueeze(1)
    half = torch.arange(0, dim, 2, dtype=torch.float64)
    freq = torch.exp(-math.log(10000.0) * half / dim)
    table = torch.zeros((max_len, dim), dtype=torch.float64)
    table[:, 0::2] = torch.sin(position * freq)
    table[:, 1::2] = torch.cos(position * freq)[:, : dim // 2]
    return table.to(torch.float32)


class MultiHeadSelfAttention(nn.Module):
    def __init__(self, dim: int, heads: int):
        super().__init__()
        if dim % heads != 0:
            raise ConfigError(f"dim {dim} not divisible by heads {heads}")
        self.dim = dim
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.out_proj = nn.Linear(dim, dim)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor):
        """x: (B, T, dim); pad_mask: (B, T) True at padding.

        Returns (out, attn) with attn (B, heads, T, T). Padded keys get
        exactly zero weight; rows for padded queries are zeroed outright
        so no NaN from an all-masked softmax can reach the backward pass.
        """
        b, t, _ = x.shape

        def split(m):
            return m.view(b, t, self.heads, self.head_dim).transpose(1, 2)

        q, k, v = split(self.q_proj(x)), split(self.k_proj(x)), split(self.v_proj(x))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        scores = scores.masked_fill(pad_mask[:, None, None, :], float("-inf"))
        attn = torch.softmax(scores, dim=-1)
        attn = torch.where(pad_mask[:, None, :, None], torch.zeros((), dtype=attn.dtype), attn)
        out = (attn @ v).transpose(1, 2).reshape(b, t, self.dim)
        return self.out_proj(out), attn


class EncoderLayer(nn.Module):
    """Post-norm residual block: attention then position-wise feedforward."""

    def __init__(self, dim: int, heads: int, ff_dim: int, dropout: float):
        super().__init__()
        self.attn = MultiHeadSelfAttention(dim, heads)
        self.norm1 = nn.LayerNorm(dim)
        self.norm2 = nn.LayerNorm(dim)
        self.ff = nn.Sequential(
            nn.Linear(dim, ff_dim), nn.ReLU(), nn.Linear(ff_dim, dim)
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, pad_mask: torch.Tensor):
        attn_out, attn = self.attn(x, pad_mask)
        x = self.norm1(x + self.dropout(attn_out))
        x = self.norm2(x + self.dropout(self.ff(x)))
        return x, attn


def build_embedding_layer(
    token_vocab: TokenVocab,
    dim: int,
    pretrained: WordVectorTable | None = None,
    seed: int = 0,
) -> nn.Embedding:
    """Token embedding table.

    Without `pretrained`: random normal rows, trainable (the baseline).
    With `pretrained`: rows copied for vocabulary words found in the table
    (looked up case-folded), zero rows for the rest, and the whole layer
    frozen so the copied weights stay byte-identical through training.
    """
    emb = nn.Embedding(len(token_vocab), dim, padding_idx=token_vocab.pad_id)
    if pretrained is None:
        gen = torch.Generator().manual_seed(seed)
        with torch.no_grad():
            emb.weight.normal_(0.0, 0.1, generator=gen)
            emb.weight[token_vocab.pad_id].zero_()
        return emb
    if pretrained.vectors.shape[1] != dim:
        raise ConfigError(
            f"pretrained dimension {pretrained.vectors.shape[1]} != model dim {dim}"
        )
    with torch.no_grad():
        emb.weight.zero_()
        for idx, word in enumerate(token_vocab.words):
            row = pretrained.id_of.get(word.lower())
            if row is not None and idx != token_vocab.pad_id:
                emb.weight[idx] = torch.from_numpy(
                    pretrained.vectors[row].copy()
                )
    emb.weight.requires_grad_(False)
    return emb


class TokenTagger(nn.Module):
    """Embeddings + sinusoidal positions + encoder stack + per-token logits."""

    def __init__(
        self,
        embedding: nn.Embedding,
        n_labels: int,
        layers: int,
        heads: int,
        ff_dim: int | None = None,
        dropout: float = 0.1,
        max_len: int = 128,
        scale_embeddings: bool = True,
    ):
        super().__init__()
        dim = embedding.embedding_dim
        self.embedding = embedding
        self.scale = math.sqrt(dim) if scale_embeddings else 1.0
        self.register_buffer("positions", sinusoidal_positions(max_len, dim))
        self.dropout = nn.Dropout(dropout)
        self.layers = nn.ModuleList(
            EncoderLayer(dim, heads, ff_dim or 4 * dim, dropout)
            for _ in range(layers)
        )
        self.classifier = nn.Linear(dim, n_labels)
        self.max_len = max_len

    def forward(
        self,
        token_ids: torch.Tensor,
        pad_mask: torch.Tensor,
        return_attention: bool = False,
    ):
        t = token_ids.shape[1]
        if t > self.max_len:
            raise ConfigError(f"sequence length {t} exceeds max_len {self.max_len}")
        x = self.embedding(token_ids) * self.scale
        x = x + self.positions[:t].to(x.dtype)
        x = self.dropout(x)
        attentions = []
        for layer in self.layers:
            x, attn = layer(x, pad_mask)
            if return_attention:
                attentions.append(attn)
        logits = self.classifier(x)
        if return_attention:
            return logits, attentions
        return logits
