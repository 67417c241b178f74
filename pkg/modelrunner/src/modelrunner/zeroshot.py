"""Zero-shot scoring: NLI entailment probability of each sub-label against
the sentence, with the class-name / template / concatenated variants."""

from __future__ import annotations

import json

import torch

from .data import Example
from .encoding import encode_pair
from .model import TinyEncoder

CHALLENGE_SUBLABELS = (
    "challenge",
    "problem",
    "difficulty",
    "flaw",
    "limitation",
    "failure",
    "lack of clarity",
    "gap of knowledge",
)

DIRECTION_SUBLABELS = (
    "direction",
    "suggestion",
    "hypothesis",
    "need for further research",
    "open question",
    "future work",
)

VARIANTS = ("sublabels", "class_name", "template", "concatenated")

ENTAILMENT_INDEX = 0


def hypothesis_lists(variant: str) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Sub-label hypothesis strings per variant, (challenge set, direction set)."""
    if variant == "sublabels":
        return CHALLENGE_SUBLABELS, DIRECTION_SUBLABELS
    if variant == "class_name":
        return ("challenge",), ("direction",)
    if variant == "template":
        return (
            ("This sentence is about a challenge",),
            ("This sentence is about a future direction",),
        )
    if variant == "concatenated":
        return (", ".join(CHALLENGE_SUBLABELS),), (", ".join(DIRECTION_SUBLABELS),)
    raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")


@torch.no_grad()
def entailment_prob(model: TinyEncoder, premise: str, hypothesis: str) -> float:
    model.eval()
    enc = encode_pair(premise, hypothesis, model.spec.vocab_size, model.spec.max_len)
    ids, mask = enc.padded(len(enc.ids))
    logits = model(torch.tensor([ids]), torch.tensor([mask]))
    return float(torch.softmax(logits[0], dim=-1)[ENTAILMENT_INDEX])


def score_example(model: TinyEncoder, ex: Example, variant: str) -> dict:
    challenge_set, direction_set = hypothesis_lists(variant)
    return {
        "sentence_id": ex.sentence_id,
        "challenge_sublabel_probs": {
            h: round(entailment_prob(model, ex.text, h), 6) for h in challenge_set
        },
        "direction_sublabel_probs": {
            h: round(entailment_prob(model, ex.text, h), 6) for h in direction_set
        },
    }


def emit_zeroshot_scores(
    model: TinyEncoder, examples: list[Example], variant: str, out_path
) -> int:
    ordered = sorted(examples, key=lambda e: e.sentence_id)
    with open(out_path, "w", encoding="utf-8") as fh:
        for ex in ordered:
            fh.write(json.dumps(score_example(model, ex, variant), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
    return len(ordered)
