"""Core domain types and the sentence identifier scheme.

Every record type is an immutable value object with a canonical JSON
encoding: keys sorted, compact separators, UTF-8, absent optional fields
omitted.  Canonical lines survive decode/encode byte-exactly, which is what
makes JSON-lines files diffable and lets snapshot builds be deterministic.
"""

from __future__ import annotations

import hashlib
import json
import math
import unicodedata
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

from .errors import ValidationError


def canonical_json(obj: Any) -> str:
    """Serialize ``obj`` to the canonical compact JSON form."""
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def token_count(text: str) -> int:
    """Number of whitespace tokens after Unicode NFC normalization."""
    return len(unicodedata.normalize("NFC", text).split())


def make_sentence_id(paper_id: str, position: int, text: str) -> str:
    """Deterministic 64-hex-char identifier for a sentence.

    The digest is SHA-256 over the NUL-separated byte encoding
    ``paper_id \\x00 position \\x00 text`` so that ids are stable across
    runs and platforms and can be used to join externally produced files
    (logits, NER output) back to the corpus.
    """
    if not paper_id:
        raise ValidationError("paper_id must be nonempty")
    if position < 0:
        raise ValidationError("position must be >= 0")
    payload = f"{paper_id}\x00{position}\x00{text}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class PaperRecord:
    """One source paper: metadata plus its pre-segmented sentences, in order."""

    paper_id: str
    title: str
    sentences: tuple[str, ...]
    date: Optional[str] = None
    url: Optional[str] = None
    journal: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.paper_id:
            raise ValidationError("paper_id must be nonempty")
        object.__setattr__(self, "sentences", tuple(self.sentences))

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "paper_id": self.paper_id,
            "title": self.title,
            "sentences": list(self.sentences),
        }
        if self.date is not None:
            d["date"] = self.date
        if self.url is not None:
            d["url"] = self.url
        if self.journal is not None:
            d["journal"] = self.journal
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PaperRecord":
        return cls(
            paper_id=d["paper_id"],
            title=d.get("title", ""),
            sentences=tuple(d.get("sentences", ())),
            date=d.get("date"),
            url=d.get("url"),
            journal=d.get("journal"),
        )


@dataclass(frozen=True)
class SentenceRecord:
    """A candidate sentence with its +/-1 sentence context window."""

    sentence_id: str
    paper_id: str
    position: int
    text: str
    prev_text: Optional[str] = None
    next_text: Optional[str] = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {
            "sentence_id": self.sentence_id,
            "paper_id": self.paper_id,
            "position": self.position,
            "text": self.text,
        }
        if self.prev_text is not None:
            d["prev_text"] = self.prev_text
        if self.next_text is not None:
            d["next_text"] = self.next_text
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SentenceRecord":
        return cls(
            sentence_id=d["sentence_id"],
            paper_id=d["paper_id"],
            position=d["position"],
            text=d["text"],
            prev_text=d.get("prev_text"),
            next_text=d.get("next_text"),
        )

    @classmethod
    def build(
        cls,
        paper_id: str,
        position: int,
        text: str,
        prev_text: Optional[str] = None,
        next_text: Optional[str] = None,
    ) -> "SentenceRecord":
        """Construct a record with its id derived from (paper_id, position, text)."""
        return cls(
            sentence_id=make_sentence_id(paper_id, position, text),
            paper_id=paper_id,
            position=position,
            text=text,
            prev_text=prev_text,
            next_text=next_text,
        )


def validate_sentence_record(rec: SentenceRecord) -> list[str]:
    """Check a SentenceRecord against its invariants.

    Returns the list of violated invariants; an empty list means the record
    is accepted.  Violations never raise so callers can report all of them.
    """
    problems: list[str] = []
    if not rec.paper_id:
        problems.append("empty paper_id")
    if rec.position < 0:
        problems.append("negative position")
    if not rec.text.strip():
        problems.append("empty text")
    if rec.position == 0 and rec.prev_text is not None:
        problems.append("prev_text present at position 0")
    if rec.paper_id and rec.position >= 0:
        expected = make_sentence_id(rec.paper_id, rec.position, rec.text)
        if rec.sentence_id != expected:
            problems.append("sentence_id does not match (paper_id, position, text)")
    return problems


@dataclass(frozen=True)
class LabelPair:
    """The two binary targets, optionally with per-label confidence."""

    challenge: bool
    direction: bool
    challenge_prob: Optional[float] = None
    direction_prob: Optional[float] = None

    def __post_init__(self) -> None:
        for name, p in (("challenge_prob", self.challenge_prob), ("direction_prob", self.direction_prob)):
            if p is not None and not (0.0 <= p <= 1.0):
                raise ValidationError(f"{name} must lie in [0,1], got {p}")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"challenge": self.challenge, "direction": self.direction}
        if self.challenge_prob is not None:
            d["challenge_prob"] = self.challenge_prob
        if self.direction_prob is not None:
            d["direction_prob"] = self.direction_prob
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LabelPair":
        return cls(
            challenge=bool(d["challenge"]),
            direction=bool(d["direction"]),
            challenge_prob=d.get("challenge_prob"),
            direction_prob=d.get("direction_prob"),
        )


@dataclass(frozen=True)
class SliceLogits:
    """The four per-slice (challenge, direction) logit pairs for one sentence.

    Slices follow the model-runner contract: sentence model on sentence
    input, context model on context input, then the two crossed variants.
    """

    sentence_id: str
    l1: tuple[float, float]
    l2: tuple[float, float]
    l3: tuple[float, float]
    l4: tuple[float, float]

    def __post_init__(self) -> None:
        for name in ("l1", "l2", "l3", "l4"):
            pair = getattr(self, name)
            if len(pair) != 2:
                raise ValidationError(f"{name} must be a (challenge, direction) pair")
            pair = (float(pair[0]), float(pair[1]))
            if not all(math.isfinite(v) for v in pair):
                raise ValidationError(f"{name} contains a non-finite logit")
            object.__setattr__(self, name, pair)

    @property
    def slices(self) -> tuple[tuple[float, float], ...]:
        return (self.l1, self.l2, self.l3, self.l4)

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "l1": list(self.l1),
            "l2": list(self.l2),
            "l3": list(self.l3),
            "l4": list(self.l4),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SliceLogits":
        missing = [k for k in ("sentence_id", "l1", "l2", "l3", "l4") if k not in d]
        if missing:
            raise ValidationError(f"slice logits record missing fields: {', '.join(missing)}")
        return cls(
            sentence_id=d["sentence_id"],
            l1=tuple(d["l1"]),
            l2=tuple(d["l2"]),
            l3=tuple(d["l3"]),
            l4=tuple(d["l4"]),
        )


def write_jsonl(path, records: Iterable[Any]) -> int:
    """Write dict-convertible records to a JSON-lines file; returns the count."""
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            d = rec.to_dict() if hasattr(rec, "to_dict") else rec
            fh.write(canonical_json(d))
            fh.write("\n")
            n += 1
    return n


def read_jsonl(path, from_dict=None) -> Iterator[Any]:
    """Yield records from a JSON-lines file, optionally decoded via ``from_dict``."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            yield from_dict(d) if from_dict is not None else d
