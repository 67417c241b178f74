"""Sentence scorers: keyword and polarity baselines, zero-shot sub-label
thresholding, and the four-slice logit combination with selectable strategy."""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional, Sequence

from .annotate import KeywordLexicon, lemma_tokens, lexicon_match
from .errors import ValidationError
from .records import LabelPair, SentenceRecord, SliceLogits

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


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def keyword_score(sentence: SentenceRecord, lex: KeywordLexicon) -> LabelPair:
    """Label positive iff the sentence mentions at least one lexicon term."""
    challenge_hits, direction_hits = lexicon_match(sentence, lex)
    return LabelPair(challenge=bool(challenge_hits), direction=bool(direction_hits))


# Compact built-in valence list for the polarity baseline. Keys are stored in
# raw form and lemmatized at load so they normalize the same way sentences do.
_BUILTIN_VALENCES = {
    "fail": -0.9, "failure": -0.9, "problem": -0.7, "problematic": -0.8,
    "difficult": -0.7, "difficulty": -0.7, "hard": -0.5, "challenge": -0.5,
    "limitation": -0.6, "limited": -0.4, "poor": -0.7, "poorly": -0.7,
    "lack": -0.6, "lacking": -0.6, "unclear": -0.6, "unknown": -0.5,
    "severe": -0.8, "worse": -0.8, "worst": -1.0, "bad": -0.7,
    "negative": -0.4, "risk": -0.5, "harm": -0.8, "adverse": -0.7,
    "obstacle": -0.6, "barrier": -0.6, "concern": -0.5, "error": -0.6,
    "wrong": -0.7, "insufficient": -0.6, "inadequate": -0.7, "flawed": -0.8,
    "good": 0.7, "better": 0.6, "best": 0.9, "improve": 0.6,
    "improvement": 0.6, "promising": 0.8, "novel": 0.4, "useful": 0.6,
    "effective": 0.6, "benefit": 0.7, "beneficial": 0.7, "success": 0.8,
    "successful": 0.8, "opportunity": 0.6, "potential": 0.3, "encourage": 0.5,
    "encouraging": 0.6, "hope": 0.5, "advance": 0.5, "positive": 0.4,
    "interesting": 0.4, "valuable": 0.6, "helpful": 0.6, "robust": 0.5,
}


@dataclass(frozen=True)
class PolarityLexicon:
    """Lemma -> valence in [-1, 1]."""

    valences: Mapping[str, float]

    def __post_init__(self) -> None:
        normalized = {}
        for word, v in self.valences.items():
            if not (-1.0 <= v <= 1.0):
                raise ValidationError(f"valence for {word!r} outside [-1,1]")
            key = " ".join(lemma_tokens(word)) or word.lower()
            normalized[key] = v
        object.__setattr__(self, "valences", normalized)

    @classmethod
    def built_in(cls) -> "PolarityLexicon":
        return cls(valences=_BUILTIN_VALENCES)


def polarity_score(
    sentence: SentenceRecord,
    lexicon: Optional[PolarityLexicon] = None,
    neg_threshold: float = -0.1,
    pos_threshold: float = 0.1,
) -> LabelPair:
    """Mean token valence mapped to labels: negative tone -> challenge,
    positive tone -> direction.  Tokens outside the lexicon are neutral and
    excluded from the mean; a fully neutral sentence has polarity 0."""
    if not (neg_threshold <= 0.0 <= pos_threshold):
        raise ValidationError("thresholds must satisfy neg_threshold <= 0 <= pos_threshold")
    lexicon = lexicon if lexicon is not None else PolarityLexicon.built_in()
    values = [lexicon.valences[t] for t in lemma_tokens(sentence.text) if t in lexicon.valences]
    polarity = sum(values) / len(values) if values else 0.0
    return LabelPair(challenge=polarity <= neg_threshold, direction=polarity >= pos_threshold)


@dataclass(frozen=True)
class ZeroShotScores:
    """Per-sentence entailment probabilities for each sub-label variant."""

    sentence_id: str
    challenge_sublabel_probs: Mapping[str, float]
    direction_sublabel_probs: Mapping[str, float]

    def __post_init__(self) -> None:
        for name in ("challenge_sublabel_probs", "direction_sublabel_probs"):
            probs = dict(getattr(self, name))
            if not probs:
                raise ValidationError(f"{name} must be nonempty")
            for label, p in probs.items():
                if not (0.0 <= p <= 1.0):
                    raise ValidationError(f"{name}[{label!r}] = {p} outside [0,1]")
            object.__setattr__(self, name, probs)

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "challenge_sublabel_probs": dict(sorted(self.challenge_sublabel_probs.items())),
            "direction_sublabel_probs": dict(sorted(self.direction_sublabel_probs.items())),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ZeroShotScores":
        missing = [
            k
            for k in ("sentence_id", "challenge_sublabel_probs", "direction_sublabel_probs")
            if k not in d
        ]
        if missing:
            raise ValidationError(f"zero-shot record missing fields: {', '.join(missing)}")
        return cls(
            sentence_id=d["sentence_id"],
            challenge_sublabel_probs=d["challenge_sublabel_probs"],
            direction_sublabel_probs=d["direction_sublabel_probs"],
        )


def zeroshot_decide(z: ZeroShotScores, threshold: float = 0.9) -> LabelPair:
    """Take the maximum probability over each sub-label set and threshold it
    (inclusive).  The maxima are reported as the label confidences."""
    m_c = max(z.challenge_sublabel_probs.values())
    m_d = max(z.direction_sublabel_probs.values())
    return LabelPair(
        challenge=m_c >= threshold,
        direction=m_d >= threshold,
        challenge_prob=m_c,
        direction_prob=m_d,
    )


STRATEGY_KINDS = ("mean", "median", "majority_vote", "logodds_extremize")


@dataclass(frozen=True)
class CombineStrategy:
    kind: str
    alpha: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValidationError(f"unknown combine strategy {self.kind!r}")
        if self.kind == "logodds_extremize" and not self.alpha > 1.0:
            raise ValidationError("extremization alpha must be > 1")

    @classmethod
    def parse(cls, spec: str) -> "CombineStrategy":
        """Parse "mean", "median", "majority_vote" or "logodds_extremize[:alpha]"."""
        kind, _, arg = spec.partition(":")
        if kind == "logodds_extremize" and arg:
            return cls(kind=kind, alpha=float(arg))
        return cls(kind=kind)


@dataclass(frozen=True)
class ScoredSentence:
    sentence_id: str
    combined_logits: tuple[float, float]
    probs: tuple[float, float]
    decision: LabelPair

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "combined_logits": list(self.combined_logits),
            "probs": list(self.probs),
            "decision": self.decision.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScoredSentence":
        return cls(
            sentence_id=d["sentence_id"],
            combined_logits=tuple(d["combined_logits"]),
            probs=tuple(d["probs"]),
            decision=LabelPair.from_dict(d["decision"]),
        )


def _combine_one(values: Sequence[float], strategy: CombineStrategy) -> tuple[float, bool]:
    """Combine one label's logits; returns (combined logit, positive decision)."""
    if strategy.kind == "mean":
        combined = sum(values) / len(values)
    elif strategy.kind == "median":
        combined = float(statistics.median(values))
    elif strategy.kind == "logodds_extremize":
        combined = strategy.alpha * (sum(values) / len(values))
    else:  # majority_vote: logit > 0 votes positive, 0 votes negative
        pos = [v for v in values if v > 0]
        neg = [v for v in values if v <= 0]
        if len(pos) > len(neg):
            return sum(pos) / len(pos), True
        if len(neg) > len(pos):
            return sum(neg) / len(neg), False
        mean = sum(values) / len(values)
        return mean, mean > 0
    return combined, logistic(combined) >= 0.5


def slice_combine(
    s: SliceLogits,
    strategy: CombineStrategy = CombineStrategy("mean"),
    slices: Sequence[int] = (1, 2, 3, 4),
) -> ScoredSentence:
    """Combine the per-slice logits into one (challenge, direction) pair.

    Each label is combined independently.  ``slices`` selects the subset to
    combine (1-based), which is how the {l1,l2} / {l3,l4} ablations run.
    """
    if not slices or any(i not in (1, 2, 3, 4) for i in slices):
        raise ValidationError("slices must be a nonempty subset of {1,2,3,4}")
    selected = [s.slices[i - 1] for i in sorted(set(slices))]
    ch_logit, ch_pos = _combine_one([p[0] for p in selected], strategy)
    dr_logit, dr_pos = _combine_one([p[1] for p in selected], strategy)
    probs = (logistic(ch_logit), logistic(dr_logit))
    return ScoredSentence(
        sentence_id=s.sentence_id,
        combined_logits=(ch_logit, dr_logit),
        probs=probs,
        decision=LabelPair(
            challenge=ch_pos,
            direction=dr_pos,
            challenge_prob=probs[0],
            direction_prob=probs[1],
        ),
    )


def decide(
    scored: ScoredSentence, challenge_threshold: float = 0.5, direction_threshold: float = 0.5
) -> LabelPair:
    """Threshold the combined probabilities (inclusive), per label independently."""
    for name, t in (("challenge", challenge_threshold), ("direction", direction_threshold)):
        if not (0.0 < t < 1.0):
            raise ValidationError(f"{name} threshold must lie in (0,1), got {t}")
    return LabelPair(
        challenge=scored.probs[0] >= challenge_threshold,
        direction=scored.probs[1] >= direction_threshold,
        challenge_prob=scored.probs[0],
        direction_prob=scored.probs[1],
    )


def agreement_stats(slices: Iterable[SliceLogits]) -> dict[str, dict[str, float]]:
    """How often the four slice decisions (logit > 0) agree, per label.

    Returns counts and fractions over {agree_4, agree_3, tie} buckets.
    """
    buckets = {
        "challenge": {"agree_4": 0, "agree_3": 0, "tie": 0},
        "direction": {"agree_4": 0, "agree_3": 0, "tie": 0},
    }
    total = 0
    for rec in slices:
        total += 1
        for idx, label in enumerate(("challenge", "direction")):
            pos = sum(1 for pair in rec.slices if pair[idx] > 0)
            key = "agree_4" if pos in (0, 4) else ("agree_3" if pos in (1, 3) else "tie")
            buckets[label][key] += 1
    out: dict[str, dict[str, float]] = {"counts": {}, "fractions": {}}
    for label, hist in buckets.items():
        out["counts"][label] = dict(hist)
        out["fractions"][label] = {
            k: (v / total if total else 0.0) for k, v in hist.items()
        }
    out["total"] = total
    return out
