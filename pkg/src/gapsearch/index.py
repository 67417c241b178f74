"""Immutable search index: high-confidence sentence store, per-entity
postings, co-occurrence and autocomplete tables, with single-file
persistence.

Builds are deterministic: identical inputs produce byte-identical snapshot
files, which makes deploys diffable and load-time integrity checks cheap.
"""

from __future__ import annotations

import hashlib
import json
import logging
from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import NotFoundError, SnapshotError, ValidationError
from .linking import EntityLink, EntityVocabulary, VocabEntry, normalize_name
from .records import LabelPair, PaperRecord, SentenceRecord, canonical_json
from .scoring import ScoredSentence

logger = logging.getLogger(__name__)

FORMAT_MAGIC = "GAPSEARCH-SNAPSHOT"
FORMAT_VERSION = 1

QUERY_LABELS = ("challenge", "direction", "both")


@dataclass(frozen=True)
class IndexedSentence:
    """A sentence admitted to the index, with everything the UI renders."""

    sentence_id: str
    paper_id: str
    position: int
    text: str
    decision: LabelPair
    probs: tuple[float, float]
    entity_ids: tuple[str, ...] = ()
    prev_text: Optional[str] = None
    next_text: Optional[str] = None
    title: str = ""
    date: Optional[str] = None
    url: Optional[str] = None
    journal: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "entity_ids", tuple(self.entity_ids))
        object.__setattr__(self, "probs", (float(self.probs[0]), float(self.probs[1])))

    def to_dict(self) -> dict:
        d = {
            "sentence_id": self.sentence_id,
            "paper_id": self.paper_id,
            "position": self.position,
            "text": self.text,
            "decision": {"challenge": self.decision.challenge, "direction": self.decision.direction},
            "probs": list(self.probs),
            "entity_ids": list(self.entity_ids),
            "title": self.title,
        }
        for key in ("prev_text", "next_text", "date", "url", "journal"):
            value = getattr(self, key)
            if value is not None:
                d[key] = value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IndexedSentence":
        return cls(
            sentence_id=d["sentence_id"],
            paper_id=d["paper_id"],
            position=d["position"],
            text=d["text"],
            decision=LabelPair(
                challenge=d["decision"]["challenge"], direction=d["decision"]["direction"]
            ),
            probs=tuple(d["probs"]),
            entity_ids=tuple(d.get("entity_ids", ())),
            prev_text=d.get("prev_text"),
            next_text=d.get("next_text"),
            title=d.get("title", ""),
            date=d.get("date"),
            url=d.get("url"),
            journal=d.get("journal"),
        )


@dataclass(frozen=True)
class QueryPage:
    total: int
    offset: int
    limit: int
    items: tuple[IndexedSentence, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))


class IndexSnapshot:
    """Loaded, immutable snapshot; safe for unlimited concurrent readers."""

    def __init__(
        self,
        sentences: dict[str, IndexedSentence],
        postings: dict[str, dict[str, list[tuple[str, float]]]],
        cooccurrence: dict[str, list[tuple[str, int]]],
        autocomplete_entries: list[tuple[str, str, str, int]],
        vocab: tuple[VocabEntry, ...],
        manifest: dict,
    ):
        self.sentences = sentences
        self.postings = postings
        self.cooccurrence = cooccurrence
        # (normalized alias, display alias, entity_id, sentence count), sorted
        # by normalized alias for prefix range scans.
        self.autocomplete_entries = autocomplete_entries
        self._autocomplete_keys = [e[0] for e in autocomplete_entries]
        self.vocab = vocab
        self.manifest = manifest
        self._names = {e.entity_id: (e.canonical_name or e.entity_id) for e in vocab}

    def entity_ids(self) -> list[str]:
        return sorted(self.postings)

    def entity_name(self, entity_id: str) -> str:
        return self._names.get(entity_id, entity_id)


def _sentence_lookup(papers: Iterable[PaperRecord]) -> dict[str, tuple[SentenceRecord, PaperRecord]]:
    lookup: dict[str, tuple[SentenceRecord, PaperRecord]] = {}
    for paper in papers:
        n = len(paper.sentences)
        for pos, text in enumerate(paper.sentences):
            rec = SentenceRecord.build(
                paper_id=paper.paper_id,
                position=pos,
                text=text,
                prev_text=paper.sentences[pos - 1] if pos > 0 else None,
                next_text=paper.sentences[pos + 1] if pos < n - 1 else None,
            )
            lookup[rec.sentence_id] = (rec, paper)
    return lookup


def build_index(
    scored: Sequence[ScoredSentence],
    links: Iterable[EntityLink],
    vocab: EntityVocabulary,
    papers: Iterable[PaperRecord],
    challenge_threshold: float = 0.99,
    direction_threshold: float = 0.99,
) -> IndexSnapshot:
    """Assemble the snapshot from scored sentences, entity links, the entity
    vocabulary and the source papers.

    Only sentences whose challenge or direction probability clears its
    threshold are indexed; postings, co-occurrence and autocomplete tables
    are computed over those sentences alone.
    """
    for name, t in (("challenge", challenge_threshold), ("direction", direction_threshold)):
        if not (0.0 < t < 1.0):
            raise ValidationError(f"{name} threshold must lie in (0,1)")

    lookup = _sentence_lookup(papers)

    entity_ids_of: dict[str, set[str]] = {}
    for link in links:
        if link.sentence_id not in lookup:
            logger.warning("link for unknown sentence %s skipped", link.sentence_id)
            continue
        if link.entity_id in vocab:
            entity_ids_of.setdefault(link.sentence_id, set()).add(link.entity_id)

    sentences: dict[str, IndexedSentence] = {}
    for sc in scored:
        cp, dp = sc.probs
        is_challenge = cp >= challenge_threshold
        is_direction = dp >= direction_threshold
        if not (is_challenge or is_direction):
            continue
        hit = lookup.get(sc.sentence_id)
        if hit is None:
            logger.warning("scored sentence %s not found in corpus; skipped", sc.sentence_id)
            continue
        rec, paper = hit
        sentences[sc.sentence_id] = IndexedSentence(
            sentence_id=rec.sentence_id,
            paper_id=rec.paper_id,
            position=rec.position,
            text=rec.text,
            decision=LabelPair(challenge=is_challenge, direction=is_direction),
            probs=(cp, dp),
            entity_ids=tuple(sorted(entity_ids_of.get(sc.sentence_id, ()))),
            prev_text=rec.prev_text,
            next_text=rec.next_text,
            title=paper.title,
            date=paper.date,
            url=paper.url,
            journal=paper.journal,
        )

    postings: dict[str, dict[str, list[tuple[str, float]]]] = {}
    pair_counts: dict[tuple[str, str], int] = {}
    for sid in sorted(sentences):
        sent = sentences[sid]
        for eid in sent.entity_ids:
            lists = postings.setdefault(eid, {"challenge": [], "direction": []})
            if sent.decision.challenge:
                lists["challenge"].append((sid, sent.probs[0]))
            if sent.decision.direction:
                lists["direction"].append((sid, sent.probs[1]))
        for i, a in enumerate(sent.entity_ids):
            for b in sent.entity_ids[i + 1 :]:
                pair_counts[(a, b)] = pair_counts.get((a, b), 0) + 1

    for lists in postings.values():
        for label in ("challenge", "direction"):
            lists[label].sort(key=lambda item: (-item[1], item[0]))

    cooccurrence: dict[str, list[tuple[str, int]]] = {eid: [] for eid in postings}
    for (a, b), count in pair_counts.items():
        cooccurrence.setdefault(a, []).append((b, count))
        cooccurrence.setdefault(b, []).append((a, count))
    for eid in cooccurrence:
        cooccurrence[eid].sort(key=lambda item: (-item[1], item[0]))

    by_alias: dict[str, tuple[str, str, int]] = {}
    for entry in vocab.entries:
        names = [n for n in (entry.canonical_name, *entry.aliases) if n]
        for name in names:
            norm = normalize_name(name)
            if not norm:
                continue
            current = by_alias.get(norm)
            candidate = (name, entry.entity_id, entry.sentence_count)
            # Alias collisions resolve to the more frequent entity.
            if current is None or (candidate[2], current[1]) > (current[2], candidate[1]):
                by_alias[norm] = candidate
    autocomplete_entries = sorted(
        (norm, display, eid, count) for norm, (display, eid, count) in by_alias.items()
    )

    n_challenge = sum(1 for s in sentences.values() if s.decision.challenge)
    n_direction = sum(1 for s in sentences.values() if s.decision.direction)
    fingerprint = hashlib.sha256(
        canonical_json(
            [[sid, sentences[sid].probs[0], sentences[sid].probs[1]] for sid in sorted(sentences)]
        ).encode("utf-8")
    ).hexdigest()
    manifest = {
        "format_version": FORMAT_VERSION,
        "build_params": {
            "challenge_threshold": challenge_threshold,
            "direction_threshold": direction_threshold,
            "vocab_size": len(vocab),
        },
        "counts": {
            "sentences": len(sentences),
            "challenge_sentences": n_challenge,
            "direction_sentences": n_direction,
            "entities": len(postings),
            "autocomplete_aliases": len(autocomplete_entries),
        },
        "corpus_fingerprint": fingerprint,
    }

    return IndexSnapshot(
        sentences=sentences,
        postings=postings,
        cooccurrence=cooccurrence,
        autocomplete_entries=autocomplete_entries,
        vocab=vocab.entries,
        manifest=manifest,
    )


def query(
    idx: IndexSnapshot,
    entities: Sequence[str],
    label: str = "both",
    offset: int = 0,
    limit: int = 20,
    dedupe: bool = False,
) -> QueryPage:
    """Sentences linked to *all* requested entities, ranked by confidence.

    ``label`` filters to challenge or direction postings; ``both`` takes the
    union and ranks by the higher of the two probabilities.  Pagination is
    stable: ordering is (probability desc, sentence_id).  With ``dedupe``,
    sentences repeating an earlier result's text (as happens across paper
    versions) are dropped from the ranking before pagination; off by default.
    """
    if not entities:
        raise ValidationError("at least one entity is required")
    if label not in QUERY_LABELS:
        raise ValidationError(f"label must be one of {QUERY_LABELS}")
    if offset < 0 or limit < 1:
        raise ValidationError("offset must be >= 0 and limit >= 1")
    for eid in entities:
        if eid not in idx.postings:
            raise NotFoundError(f"unknown entity {eid!r}")

    def candidates(eid: str) -> dict[str, float]:
        lists = idx.postings[eid]
        if label == "both":
            merged: dict[str, float] = {}
            for lab in ("challenge", "direction"):
                for sid, prob in lists[lab]:
                    if prob > merged.get(sid, -1.0):
                        merged[sid] = prob
            return merged
        return dict(lists[label])

    entity_list = list(dict.fromkeys(entities))
    result = candidates(entity_list[0])
    for eid in entity_list[1:]:
        other = candidates(eid)
        result = {sid: prob for sid, prob in result.items() if sid in other}

    ranked = sorted(result.items(), key=lambda item: (-item[1], item[0]))
    if dedupe:
        seen_texts: set[str] = set()
        kept = []
        for sid, prob in ranked:
            text = " ".join(idx.sentences[sid].text.split())
            if text in seen_texts:
                continue
            seen_texts.add(text)
            kept.append((sid, prob))
        ranked = kept
    page = ranked[offset : offset + limit]
    return QueryPage(
        total=len(ranked),
        offset=offset,
        limit=limit,
        items=tuple(idx.sentences[sid] for sid, _ in page),
    )


def cooccurring(idx: IndexSnapshot, entity_id: str) -> list[tuple[str, int]]:
    """Entities sharing an indexed sentence with ``entity_id``, most first."""
    if entity_id not in idx.postings:
        raise NotFoundError(f"unknown entity {entity_id!r}")
    return list(idx.cooccurrence.get(entity_id, ()))


def autocomplete(idx: IndexSnapshot, prefix: str, limit: int = 10) -> list[tuple[str, str]]:
    """Aliases starting with the (case/punctuation-insensitive) prefix,
    ranked by entity sentence count; returns (alias, entity_id) pairs."""
    if not prefix:
        raise ValidationError("prefix must be at least one character")
    if limit < 1:
        raise ValidationError("limit must be >= 1")
    norm = normalize_name(prefix)
    if not norm:
        return []
    keys = idx._autocomplete_keys
    start = bisect_left(keys, norm)
    matches = []
    for i in range(start, len(keys)):
        if not keys[i].startswith(norm):
            break
        matches.append(idx.autocomplete_entries[i])
    matches.sort(key=lambda e: (-e[3], e[0], e[2]))
    return [(display, eid) for _, display, eid, _ in matches[:limit]]


def get_sentence(idx: IndexSnapshot, sentence_id: str) -> IndexedSentence:
    sent = idx.sentences.get(sentence_id)
    if sent is None:
        raise NotFoundError(f"sentence {sentence_id!r} is not in the index")
    return sent


def _sections(idx: IndexSnapshot) -> list[tuple[str, bytes]]:
    sentences = {sid: idx.sentences[sid].to_dict() for sid in sorted(idx.sentences)}
    postings = {
        eid: {label: [[sid, prob] for sid, prob in lists[label]] for label in ("challenge", "direction")}
        for eid, lists in sorted(idx.postings.items())
    }
    cooc = {eid: [[other, count] for other, count in pairs] for eid, pairs in sorted(idx.cooccurrence.items())}
    auto = [list(entry) for entry in idx.autocomplete_entries]
    vocab = [entry.to_dict() for entry in idx.vocab]
    return [
        (name, (canonical_json(obj) + "\n").encode("utf-8"))
        for name, obj in (
            ("sentences", sentences),
            ("postings", postings),
            ("cooccurrence", cooc),
            ("autocomplete", auto),
            ("vocab", vocab),
        )
    ]


def persist(idx: IndexSnapshot, path) -> None:
    """Write the snapshot as a single file: magic+version line, manifest line
    with a table of contents and payload digest, then the section payload."""
    sections = _sections(idx)
    toc = []
    offset = 0
    payload = b""
    for name, blob in sections:
        digest = hashlib.sha256(blob).hexdigest()
        toc.append({"name": name, "offset": offset, "length": len(blob), "sha256": digest})
        payload += blob
        offset += len(blob)
    manifest = dict(idx.manifest)
    manifest["toc"] = toc
    manifest["payload_sha256"] = hashlib.sha256(payload).hexdigest()
    header = f"{FORMAT_MAGIC} {FORMAT_VERSION}\n".encode("utf-8")
    manifest_line = (canonical_json(manifest) + "\n").encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(manifest_line)
        fh.write(payload)


def load(path) -> IndexSnapshot:
    """Load and verify a persisted snapshot.

    Any mismatch (bad magic, wrong version, truncated payload, digest
    failure) raises ``SnapshotError``; no partial snapshot is ever returned.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    head, sep, rest = data.partition(b"\n")
    if not sep:
        raise SnapshotError("truncated snapshot: missing header")
    parts = head.decode("utf-8", errors="replace").split()
    if len(parts) != 2 or parts[0] != FORMAT_MAGIC:
        raise SnapshotError("not a snapshot file")
    if parts[1] != str(FORMAT_VERSION):
        raise SnapshotError(f"unsupported snapshot version {parts[1]} (expected {FORMAT_VERSION})")
    manifest_line, sep, payload = rest.partition(b"\n")
    if not sep:
        raise SnapshotError("truncated snapshot: missing manifest")
    try:
        manifest = json.loads(manifest_line.decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise SnapshotError(f"corrupt manifest: {exc}") from exc
    if manifest.get("format_version") != FORMAT_VERSION:
        raise SnapshotError("manifest version mismatch")
    if hashlib.sha256(payload).hexdigest() != manifest.get("payload_sha256"):
        raise SnapshotError("payload digest mismatch (truncated or corrupted snapshot)")

    parsed: dict[str, object] = {}
    for entry in manifest.get("toc", []):
        blob = payload[entry["offset"] : entry["offset"] + entry["length"]]
        if len(blob) != entry["length"] or hashlib.sha256(blob).hexdigest() != entry["sha256"]:
            raise SnapshotError(f"section {entry['name']!r} digest mismatch")
        parsed[entry["name"]] = json.loads(blob.decode("utf-8"))

    missing = {"sentences", "postings", "cooccurrence", "autocomplete", "vocab"} - set(parsed)
    if missing:
        raise SnapshotError(f"snapshot missing sections: {', '.join(sorted(missing))}")

    sentences = {sid: IndexedSentence.from_dict(d) for sid, d in parsed["sentences"].items()}
    postings = {
        eid: {label: [(sid, prob) for sid, prob in lists[label]] for label in ("challenge", "direction")}
        for eid, lists in parsed["postings"].items()
    }
    cooc = {eid: [(other, count) for other, count in pairs] for eid, pairs in parsed["cooccurrence"].items()}
    auto = [tuple(entry) for entry in parsed["autocomplete"]]
    vocab = tuple(VocabEntry.from_dict(d) for d in parsed["vocab"])
    manifest_clean = {k: v for k, v in manifest.items() if k not in ("toc", "payload_sha256")}
    return IndexSnapshot(
        sentences=sentences,
        postings=postings,
        cooccurrence=cooc,
        autocomplete_entries=auto,
        vocab=vocab,
        manifest=manifest_clean,
    )
