"""Compact transformer encoder classifier with a corpus-built vocabulary.

No pretrained checkpoint is assumed: the tokenizer vocabulary is built from
the training split and the encoder trains from random initialization. The
architecture stays deliberately small so five-fold runs finish on a CPU.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import torch
from torch import nn

PAD_ID = 0
UNK_ID = 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Vocabulary:
    token_to_id: dict = field(default_factory=dict)

    @classmethod
    def build(cls, texts, min_freq: int = 1) -> "Vocabulary":
        counts: dict[str, int] = {}
        for text in texts:
            for token in tokenize(text):
                counts[token] = counts.get(token, 0) + 1
        token_to_id = {}
        for token in sorted(counts):
            if counts[token] >= min_freq:
                token_to_id[token] = len(token_to_id) + 2  # 0=pad, 1=unk
        return cls(token_to_id=token_to_id)

    def __len__(self) -> int:
        return len(self.token_to_id) + 2

    def encode(self, text: str, max_len: int) -> list[int]:
        ids = [self.token_to_id.get(t, UNK_ID) for t in tokenize(text)[:max_len]]
        return ids if ids else [UNK_ID]


class EncoderClassifier(nn.Module):
    """Token embedding + positional embedding + transformer encoder +
    masked mean pooling + linear head (2 classes)."""

    def __init__(
        self,
        vocab_size: int,
        d_model: int = 64,
        n_heads: int = 4,
        n_layers: int = 2,
        ffn_dim: int = 128,
        max_len: int = 64,
        dropout: float = 0.1,
    ):
        super().__init__()
        self.max_len = max_len
        self.token_embedding = nn.Embedding(vocab_size, d_model, padding_idx=PAD_ID)
        self.position_embedding = nn.Embedding(max_len, d_model)
        layer = nn.TransformerEncoderLayer(
            d_model=d_model,
            nhead=n_heads,
            dim_feedforward=ffn_dim,
            dropout=dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=n_layers)
        self.head = nn.Linear(d_model, 2)

    def forward(self, token_ids: torch.Tensor) -> torch.Tensor:
        mask = token_ids.eq(PAD_ID)
        positions = torch.arange(token_ids.size(1), device=token_ids.device)
        hidden = self.token_embedding(token_ids) + self.position_embedding(positions)
        hidden = self.encoder(hidden, src_key_padding_mask=mask)
        keep = (~mask).unsqueeze(-1).float()
        pooled = (hidden * keep).sum(dim=1) / keep.sum(dim=1).clamp(min=1.0)
        return self.head(pooled)


def batch_encode(vocab: Vocabulary, texts, max_len: int) -> torch.Tensor:
    encoded = [vocab.encode(t, max_len) for t in texts]
    width = max(len(e) for e in encoded)
    out = torch.full((len(encoded), width), PAD_ID, dtype=torch.long)
    for i, ids in enumerate(encoded):
        out[i, : len(ids)] = torch.tensor(ids, dtype=torch.long)
    return out
