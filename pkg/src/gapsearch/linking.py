"""Mention grounding against a MeSH-style KB via character-trigram cosine
similarity, and selection of the indexed entity vocabulary."""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

from .errors import ValidationError

_PUNCT_RE = re.compile(r"[^\w\s]|_")
_WS_RE = re.compile(r"\s+")

BOUNDARY = "#"


def normalize_name(s: str) -> str:
    """Lowercase, NFC-normalize, drop punctuation, collapse whitespace."""
    s = unicodedata.normalize("NFC", s).lower()
    s = _PUNCT_RE.sub("", s)
    return _WS_RE.sub(" ", s).strip()


def trigram_profile(
    s: str, idf: Optional[Mapping[str, float]] = None, pad: bool = True
) -> dict[str, float]:
    """Weighted character-trigram vector of the normalized string.

    Weights are term frequency times idf (idf defaults to 1 when no corpus
    statistics are loaded).  Boundary padding guarantees one- and two-char
    strings still produce at least one trigram.
    """
    norm = normalize_name(s)
    if not norm:
        return {}
    if pad:
        norm = BOUNDARY + norm + BOUNDARY
    counts = Counter(norm[i : i + 3] for i in range(len(norm) - 2))
    if idf is None:
        return {g: float(c) for g, c in counts.items()}
    return {g: c * idf.get(g, 1.0) for g, c in counts.items()}


def cosine(a: Mapping[str, float], b: Mapping[str, float]) -> float:
    if not a or not b:
        return 1.0 if not a and not b else 0.0
    if len(b) < len(a):
        a, b = b, a
    dot = sum(w * b[g] for g, w in a.items() if g in b)
    na = math.sqrt(sum(w * w for w in a.values()))
    nb = math.sqrt(sum(w * w for w in b.values()))
    return dot / (na * nb) if na and nb else 0.0


@dataclass(frozen=True)
class KbEntity:
    entity_id: str
    canonical_name: str
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.entity_id:
            raise ValidationError("entity_id must be nonempty")
        object.__setattr__(self, "aliases", tuple(self.aliases))

    @property
    def names(self) -> tuple[str, ...]:
        return (self.canonical_name,) + self.aliases

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "canonical_name": self.canonical_name,
            "aliases": list(self.aliases),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KbEntity":
        return cls(
            entity_id=d["entity_id"],
            canonical_name=d["canonical_name"],
            aliases=tuple(d.get("aliases", ())),
        )


@dataclass(frozen=True)
class MentionRecord:
    sentence_id: str
    surface: str
    char_span: tuple[int, int]
    source_model: str

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "surface": self.surface,
            "char_span": list(self.char_span),
            "source_model": self.source_model,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MentionRecord":
        return cls(
            sentence_id=d["sentence_id"],
            surface=d["surface"],
            char_span=tuple(d["char_span"]),
            source_model=d.get("source_model", ""),
        )


def validate_mention(m: MentionRecord, sentence_text: str) -> list[str]:
    """Span/surface consistency check against the sentence the mention cites."""
    problems = []
    start, end = m.char_span
    if not (0 <= start < end <= len(sentence_text)):
        problems.append("char_span outside sentence text")
    elif sentence_text[start:end] != m.surface:
        problems.append("surface does not equal the spanned text")
    return problems


@dataclass(frozen=True)
class EntityLink:
    sentence_id: str
    entity_id: str
    surface: str
    similarity: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.similarity <= 1.0):
            raise ValidationError("similarity must lie in [0,1]")

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "entity_id": self.entity_id,
            "surface": self.surface,
            "similarity": self.similarity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EntityLink":
        return cls(
            sentence_id=d["sentence_id"],
            entity_id=d["entity_id"],
            surface=d["surface"],
            similarity=d["similarity"],
        )


def build_idf(kb: Iterable[KbEntity]) -> dict[str, float]:
    """Smooth idf over the trigrams of every KB name and alias."""
    df: Counter = Counter()
    n_docs = 0
    for entity in kb:
        for name in entity.names:
            grams = set(trigram_profile(name))
            if not grams:
                continue
            n_docs += 1
            df.update(grams)
    return {g: math.log((1 + n_docs) / (1 + c)) + 1.0 for g, c in df.items()}


class KbIndex:
    """Immutable profile table over all KB names and aliases.

    Build once, then share freely: linking only reads it.
    """

    def __init__(self, entities: Sequence[KbEntity], use_idf: bool = False):
        if not entities:
            raise ValidationError("knowledge base must be nonempty")
        self.entities = {e.entity_id: e for e in sorted(entities, key=lambda e: e.entity_id)}
        if len(self.entities) != len(entities):
            raise ValidationError("duplicate entity_id in knowledge base")
        self.idf = build_idf(entities) if use_idf else None
        self._profiles: list[tuple[str, dict[str, float]]] = []
        for entity in self.entities.values():
            for name in entity.names:
                profile = trigram_profile(name, idf=self.idf)
                if profile:
                    self._profiles.append((entity.entity_id, profile))

    def best_match(self, surface: str) -> tuple[Optional[str], float]:
        """Highest-cosine entity for a surface form; ties go to the lower id."""
        query = trigram_profile(surface, idf=self.idf)
        best_id: Optional[str] = None
        best_sim = -1.0
        for entity_id, profile in self._profiles:
            sim = cosine(query, profile)
            if sim > best_sim or (sim == best_sim and best_id is not None and entity_id < best_id):
                best_id, best_sim = entity_id, sim
        return best_id, max(best_sim, 0.0)


def link_mention(
    m: MentionRecord,
    kb: "KbIndex | Sequence[KbEntity]",
    threshold: float = 0.9,
) -> Optional[EntityLink]:
    """Ground one mention to its most-similar KB entity.

    Returns None when the best similarity falls below the threshold.
    """
    index = kb if isinstance(kb, KbIndex) else KbIndex(list(kb))
    entity_id, similarity = index.best_match(m.surface)
    if entity_id is None or similarity < threshold:
        return None
    return EntityLink(
        sentence_id=m.sentence_id,
        entity_id=entity_id,
        surface=m.surface,
        similarity=min(similarity, 1.0),
    )


@dataclass(frozen=True)
class VocabEntry:
    entity_id: str
    sentence_count: int
    canonical_name: str = ""
    aliases: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "aliases", tuple(self.aliases))

    def to_dict(self) -> dict:
        return {
            "entity_id": self.entity_id,
            "sentence_count": self.sentence_count,
            "canonical_name": self.canonical_name,
            "aliases": list(self.aliases),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VocabEntry":
        return cls(
            entity_id=d["entity_id"],
            sentence_count=d["sentence_count"],
            canonical_name=d.get("canonical_name", ""),
            aliases=tuple(d.get("aliases", ())),
        )


@dataclass(frozen=True)
class EntityVocabulary:
    """Entities eligible for indexing, sorted by distinct-sentence count."""

    entries: tuple[VocabEntry, ...]
    _by_id: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "_by_id", {e.entity_id: e for e in self.entries})

    def __contains__(self, entity_id: str) -> bool:
        return entity_id in self._by_id

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, entity_id: str) -> Optional[VocabEntry]:
        return self._by_id.get(entity_id)


def build_entity_vocabulary(
    links: Iterable[EntityLink],
    min_sentences: int = 10,
    top_k: int = 30000,
    kb: Optional[Sequence[KbEntity]] = None,
) -> EntityVocabulary:
    """Count distinct sentences per entity, drop rare entities, keep the
    ``top_k`` most frequent (count descending, ties by entity_id)."""
    sentences_of: dict[str, set[str]] = {}
    for link in links:
        sentences_of.setdefault(link.entity_id, set()).add(link.sentence_id)
    ranked = sorted(
        ((eid, len(sids)) for eid, sids in sentences_of.items() if len(sids) >= min_sentences),
        key=lambda item: (-item[1], item[0]),
    )[:top_k]
    kb_by_id = {e.entity_id: e for e in kb} if kb else {}
    entries = []
    for eid, count in ranked:
        entity = kb_by_id.get(eid)
        entries.append(
            VocabEntry(
                entity_id=eid,
                sentence_count=count,
                canonical_name=entity.canonical_name if entity else "",
                aliases=entity.aliases if entity else (),
            )
        )
    return EntityVocabulary(entries=tuple(entries))
