"""Slice-logit emission: cross the two trained models with the two input
encodings and write the wire-format file the scoring pipeline consumes."""

from __future__ import annotations

import json

from .data import Example
from .model import TinyEncoder
from .training import predict_logits


def compute_slices(
    model_sentence: TinyEncoder, model_context: TinyEncoder, examples: list[Example]
) -> list[dict]:
    """Per sentence: l1 = sentence model on sentence input, l2 = context model
    on context input, l3 = sentence model on context input, l4 = context model
    on sentence input."""
    ordered = sorted(examples, key=lambda e: e.sentence_id)
    l1 = predict_logits(model_sentence, ordered, "sentence")
    l2 = predict_logits(model_context, ordered, "full")
    l3 = predict_logits(model_sentence, ordered, "full")
    l4 = predict_logits(model_context, ordered, "sentence")
    rows = []
    for i, ex in enumerate(ordered):
        rows.append(
            {
                "sentence_id": ex.sentence_id,
                "l1": [round(float(v), 6) for v in l1[i]],
                "l2": [round(float(v), 6) for v in l2[i]],
                "l3": [round(float(v), 6) for v in l3[i]],
                "l4": [round(float(v), 6) for v in l4[i]],
            }
        )
    return rows


def emit_slice_logits(
    model_sentence: TinyEncoder,
    model_context: TinyEncoder,
    examples: list[Example],
    out_path,
) -> int:
    rows = compute_slices(model_sentence, model_context, examples)
    with open(out_path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True, separators=(",", ":")))
            fh.write("\n")
    return len(rows)
