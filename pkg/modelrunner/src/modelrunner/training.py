"""Fine-tuning with grid search over batch size, learning rate and epochs,
selecting the best point by dev-set F1."""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import torch
from torch import nn

from .data import Example, check_paper_disjoint
from .encoding import encode_context, encode_sentence
from .model import EncoderSpec, TinyEncoder, make_classifier, save_artifact

CONTEXT_MODES = ("sentence", "full")


@dataclass(frozen=True)
class TrainConfig:
    encoder: str = "tiny-transformer"
    batch_sizes: tuple[int, ...] = (8, 16, 32)
    learning_rates: tuple[float, ...] = (1e-5, 2e-5, 3e-5, 5e-5)
    max_epochs: int = 25
    dropout: float = 0.3
    seed: int = 0
    spec: EncoderSpec = field(default_factory=EncoderSpec)

    def __post_init__(self) -> None:
        if not self.batch_sizes or not self.learning_rates:
            raise ValueError("batch size and learning rate grids must be nonempty")
        if self.spec.dropout != self.dropout:
            object.__setattr__(self, "spec", EncoderSpec(**{**self.spec.to_dict(), "dropout": self.dropout}))

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder,
            "batch_sizes": list(self.batch_sizes),
            "learning_rates": list(self.learning_rates),
            "max_epochs": self.max_epochs,
            "dropout": self.dropout,
            "seed": self.seed,
            "spec": self.spec.to_dict(),
        }


def encode_batch(examples: list[Example], context: str, spec: EncoderSpec) -> tuple[torch.Tensor, torch.Tensor]:
    if context == "sentence":
        encoded = [encode_sentence(e.text, spec.vocab_size, spec.max_len) for e in examples]
    else:
        encoded = [
            encode_context(e.text, e.prev_text, e.next_text, spec.vocab_size, spec.max_len)
            for e in examples
        ]
    length = max(len(e.ids) for e in encoded)
    ids, masks = zip(*(e.padded(length) for e in encoded))
    return torch.tensor(ids, dtype=torch.long), torch.tensor(masks, dtype=torch.long)


@torch.no_grad()
def predict_logits(model: TinyEncoder, examples: list[Example], context: str, batch_size: int = 64) -> torch.Tensor:
    model.eval()
    chunks = []
    for i in range(0, len(examples), batch_size):
        ids, mask = encode_batch(examples[i : i + batch_size], context, model.spec)
        chunks.append(model(ids, mask))
    return torch.cat(chunks) if chunks else torch.empty(0, model.num_outputs)


def _binary_f1(pred: torch.Tensor, gold: torch.Tensor) -> float:
    tp = int(((pred == 1) & (gold == 1)).sum())
    fp = int(((pred == 1) & (gold == 0)).sum())
    fn = int(((pred == 0) & (gold == 1)).sum())
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def dev_f1(model: TinyEncoder, examples: list[Example], context: str) -> float:
    """Mean of the two per-label binary F1s at probability 0.5."""
    logits = predict_logits(model, examples, context)
    pred = (torch.sigmoid(logits) >= 0.5).long()
    gold = torch.tensor([e.labels for e in examples]).long()
    return (_binary_f1(pred[:, 0], gold[:, 0]) + _binary_f1(pred[:, 1], gold[:, 1])) / 2.0


def train(
    train_examples: list[Example],
    dev_examples: list[Example],
    cfg: TrainConfig,
    context: str = "sentence",
) -> tuple[TinyEncoder, dict]:
    """Grid-search fine-tuning; returns the best model and the training log.

    The grid crosses batch sizes and learning rates; epochs participate via
    per-epoch dev evaluation, so the selected point is (batch, lr, epoch).
    Deterministic given cfg.seed.
    """
    if context not in CONTEXT_MODES:
        raise ValueError(f"context must be one of {CONTEXT_MODES}")
    if not train_examples or not dev_examples:
        raise ValueError("train and dev splits must be nonempty")
    check_paper_disjoint(train_examples, dev_examples)

    gold = torch.tensor([e.labels for e in train_examples])
    log: dict = {"config": cfg.to_dict(), "context": context, "grid": []}
    best: dict | None = None
    best_state = None

    for batch_size in cfg.batch_sizes:
        for lr in cfg.learning_rates:
            torch.manual_seed(cfg.seed)
            model = make_classifier(cfg.spec, seed=cfg.seed)
            optimizer = torch.optim.Adam(model.parameters(), lr=lr)
            loss_fn = nn.BCEWithLogitsLoss()
            point = {"batch_size": batch_size, "learning_rate": lr, "epochs": []}
            for epoch in range(1, cfg.max_epochs + 1):
                model.train()
                epoch_loss = 0.0
                for i in range(0, len(train_examples), batch_size):
                    chunk = train_examples[i : i + batch_size]
                    ids, mask = encode_batch(chunk, context, cfg.spec)
                    optimizer.zero_grad()
                    logits = model(ids, mask)
                    loss = loss_fn(logits, gold[i : i + len(chunk)])
                    loss.backward()
                    optimizer.step()
                    epoch_loss += float(loss.detach()) * len(chunk)
                f1 = dev_f1(model, dev_examples, context)
                point["epochs"].append(
                    {"epoch": epoch, "train_loss": epoch_loss / len(train_examples), "dev_f1": f1}
                )
                if best is None or f1 > best["dev_f1"]:
                    best = {"batch_size": batch_size, "learning_rate": lr, "epoch": epoch, "dev_f1": f1}
                    best_state = {k: v.clone() for k, v in model.state_dict().items()}
            log["grid"].append(point)

    assert best is not None and best_state is not None
    log["selected"] = best
    winner = make_classifier(cfg.spec, seed=cfg.seed)
    winner.load_state_dict(best_state)
    winner.eval()
    return winner, log


def train_and_save(
    train_examples: list[Example],
    dev_examples: list[Example],
    cfg: TrainConfig,
    context: str,
    artifact_path,
    log_path=None,
) -> dict:
    started = time.time()
    model, log = train(train_examples, dev_examples, cfg, context)
    log["wall_seconds"] = round(time.time() - started, 3)
    save_artifact(model, artifact_path, extra={"context": context, "log": log["selected"], "config": cfg.to_dict()})
    if log_path:
        with open(log_path, "w", encoding="utf-8") as fh:
            json.dump(log, fh, indent=2, sort_keys=True)
    return log
