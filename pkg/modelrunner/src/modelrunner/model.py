"""Tiny transformer encoders: a two-logit sentence classifier and a
three-class NLI head for zero-shot scoring."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import torch
from torch import nn

from .encoding import PAD_ID


@dataclass(frozen=True)
class EncoderSpec:
    """Architecture hyperparameters; defaults are deliberately tiny so every
    path (including grid-search training) runs on CPU in seconds."""

    vocab_size: int = 2048
    hidden: int = 32
    layers: int = 2
    heads: int = 2
    ff_dim: int = 64
    max_len: int = 256
    dropout: float = 0.3

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EncoderSpec":
        return cls(**d)


class TinyEncoder(nn.Module):
    def __init__(self, spec: EncoderSpec, num_outputs: int):
        super().__init__()
        self.spec = spec
        self.num_outputs = num_outputs
        self.token_emb = nn.Embedding(spec.vocab_size, spec.hidden, padding_idx=PAD_ID)
        self.pos_emb = nn.Embedding(spec.max_len, spec.hidden)
        layer = nn.TransformerEncoderLayer(
            d_model=spec.hidden,
            nhead=spec.heads,
            dim_feedforward=spec.ff_dim,
            dropout=spec.dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers=spec.layers, enable_nested_tensor=False)
        self.dropout = nn.Dropout(spec.dropout)
        self.head = nn.Linear(spec.hidden, num_outputs)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device).unsqueeze(0)
        x = self.token_emb(ids) + self.pos_emb(positions)
        x = self.encoder(x, src_key_padding_mask=mask == 0)
        cls = x[:, 0, :]
        return self.head(self.dropout(cls))


def make_classifier(spec: EncoderSpec, seed: int) -> TinyEncoder:
    torch.manual_seed(seed)
    return TinyEncoder(spec, num_outputs=2)


def make_nli(spec: EncoderSpec, seed: int) -> TinyEncoder:
    # outputs: [entailment, neutral, contradiction]
    torch.manual_seed(seed)
    return TinyEncoder(spec, num_outputs=3)


def save_artifact(model: TinyEncoder, path, extra: dict | None = None) -> None:
    payload = {
        "spec": model.spec.to_dict(),
        "num_outputs": model.num_outputs,
        "state_dict": model.state_dict(),
        "extra": extra or {},
    }
    torch.save(payload, path)


def load_artifact(path) -> tuple[TinyEncoder, dict]:
    payload = torch.load(path, map_location="cpu", weights_only=False)
    spec = EncoderSpec.from_dict(payload["spec"])
    model = TinyEncoder(spec, num_outputs=payload["num_outputs"])
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("extra", {})
