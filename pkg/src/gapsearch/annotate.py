"""Dataset-construction tooling: keyword lexicon matching, candidate
sampling, label aggregation, inter-annotator agreement and paper-disjoint
stratified splits."""

from __future__ import annotations

import math
import random
import unicodedata
import warnings
from dataclasses import dataclass, field
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence

from .errors import AlignmentError, ValidationError
from .records import LabelPair, SentenceRecord

# Irregular forms the suffix rules below would mangle or miss.
_LEMMA_EXCEPTIONS = {
    "is": "be", "are": "be", "was": "be", "were": "be", "been": "be", "being": "be",
    "has": "have", "had": "have", "having": "have",
    "does": "do", "did": "do", "done": "do", "doing": "do",
    "goes": "go", "went": "go", "gone": "go",
    "hypotheses": "hypothesis",
    "analyses": "analysis",
    "studies": "study",
}

_EDGE_PUNCT = ".,;:!?()[]{}\"'`´“”‘’—–-"


def lemmatize(token: str) -> str:
    """Deterministic rule-based lemmatizer (plural/-ing/-ed stripping).

    Linguistic perfection is not the goal; what matters is that lexicon terms
    and sentence tokens are normalized by the *same* pure function, so
    matching is reproducible.  The trailing-e strip makes inflected forms
    ("exploring") meet their base form ("explore") at a shared stem.
    """
    w = token.lower()
    if w in _LEMMA_EXCEPTIONS:
        return _LEMMA_EXCEPTIONS[w]
    if len(w) > 4 and w.endswith("ies"):
        w = w[:-3] + "y"
    elif w.endswith("sses"):
        w = w[:-2]
    elif len(w) > 4 and (w.endswith("xes") or w.endswith("zes") or w.endswith("ches") or w.endswith("shes")):
        w = w[:-2]
    elif len(w) > 3 and w.endswith("s") and not (w.endswith("ss") or w.endswith("us") or w.endswith("is")):
        w = w[:-1]
    if len(w) > 5 and w.endswith("ing"):
        w = w[:-3]
        if len(w) > 2 and w[-1] == w[-2] and w[-1] not in "aeiou":
            w = w[:-1]
    elif len(w) > 4 and w.endswith("ed"):
        w = w[:-2]
        if len(w) > 2 and w[-1] == w[-2] and w[-1] not in "aeiou":
            w = w[:-1]
    if len(w) >= 4 and w.endswith("e"):
        w = w[:-1]
    return w


def lemma_tokens(text: str) -> list[str]:
    """Lowercased, punctuation-stripped, lemmatized whitespace tokens."""
    out = []
    for raw in unicodedata.normalize("NFC", text).split():
        stripped = raw.strip(_EDGE_PUNCT)
        if stripped:
            out.append(lemmatize(stripped))
    return out


def _normalize_term(term: str) -> tuple[str, ...]:
    lemmas = tuple(lemma_tokens(term))
    if not lemmas:
        raise ValidationError(f"lexicon term {term!r} is empty after normalization")
    return lemmas


@dataclass(frozen=True)
class KeywordLexicon:
    """Curated challenge/direction keyword and phrase lists.

    Entries are stored lemmatized and lowercase; phrases match as contiguous
    lemma sequences.  Matching is deliberately context-blind: "limit" hits in
    "we limit the discussion" too, which is what makes the lexicon a
    high-recall upsampling signal rather than a classifier.
    """

    challenge_terms: tuple[str, ...]
    direction_terms: tuple[str, ...]
    _challenge_seqs: tuple[tuple[str, ...], ...] = field(init=False, repr=False)
    _direction_seqs: tuple[tuple[str, ...], ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ch = tuple(" ".join(_normalize_term(t)) for t in self.challenge_terms)
        dr = tuple(" ".join(_normalize_term(t)) for t in self.direction_terms)
        object.__setattr__(self, "challenge_terms", ch)
        object.__setattr__(self, "direction_terms", dr)
        object.__setattr__(self, "_challenge_seqs", tuple(tuple(t.split()) for t in ch))
        object.__setattr__(self, "_direction_seqs", tuple(tuple(t.split()) for t in dr))

    @classmethod
    def from_text(cls, text: str) -> "KeywordLexicon":
        """Parse the plain-text lexicon format: one term per line under
        ``[challenge]`` / ``[direction]`` section headers; ``#`` comments."""
        section = None
        buckets: dict[str, list[str]] = {"challenge": [], "direction": []}
        for lineno, line in enumerate(text.splitlines(), start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                name = line[1:-1].strip().lower()
                if name not in buckets:
                    raise ValidationError(f"line {lineno}: unknown lexicon section [{name}]")
                section = name
                continue
            if section is None:
                raise ValidationError(f"line {lineno}: term before any section header")
            buckets[section].append(line)
        return cls(challenge_terms=tuple(buckets["challenge"]), direction_terms=tuple(buckets["direction"]))

    @classmethod
    def from_file(cls, path) -> "KeywordLexicon":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())

    @classmethod
    def seed(cls) -> "KeywordLexicon":
        """The built-in seed lexicon; a fuller curated list can be dropped in
        as a file with the same format."""
        text = resources.files("gapsearch.data").joinpath("seed_lexicon.txt").read_text("utf-8")
        return cls.from_text(text)


def _contains_seq(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n, m = len(haystack), len(needle)
    if m == 0 or m > n:
        return False
    first = needle[0]
    for i in range(n - m + 1):
        if haystack[i] == first and tuple(haystack[i : i + m]) == tuple(needle):
            return True
    return False


def lexicon_match(sentence: SentenceRecord, lex: KeywordLexicon) -> tuple[list[str], list[str]]:
    """Lexicon entries whose lemma sequence occurs in the lemmatized sentence."""
    lemmas = lemma_tokens(sentence.text)
    challenge_hits = [t for t, seq in zip(lex.challenge_terms, lex._challenge_seqs) if _contains_seq(lemmas, seq)]
    direction_hits = [t for t, seq in zip(lex.direction_terms, lex._direction_seqs) if _contains_seq(lemmas, seq)]
    return challenge_hits, direction_hits


def sample_candidates(
    sentences: Iterable[SentenceRecord],
    lex: KeywordLexicon,
    n_total: int,
    nonkeyword_fraction: float,
    seed: int,
) -> list[str]:
    """Draw annotation candidates: keyword-matching sentences upsampled, plus
    a ``nonkeyword_fraction`` share taken from the non-matching pool.

    Returns sentence ids, keyword-pool draws first.  Deterministic given the
    seed.  If a pool is smaller than its request the sample is partial and a
    warning is emitted.
    """
    if not (0.0 <= nonkeyword_fraction <= 1.0):
        raise ValidationError("nonkeyword_fraction must lie in [0,1]")
    keyword_pool: list[str] = []
    other_pool: list[str] = []
    for rec in sentences:
        ch, dr = lexicon_match(rec, lex)
        (keyword_pool if (ch or dr) else other_pool).append(rec.sentence_id)
    available = len(keyword_pool) + len(other_pool)
    if n_total > available:
        raise ValidationError(f"requested {n_total} candidates but only {available} sentences available")

    n_keyword = math.ceil(n_total * (1.0 - nonkeyword_fraction))
    n_other = n_total - n_keyword
    keyword_pool.sort()
    other_pool.sort()
    rng = random.Random(seed)
    taken_kw = rng.sample(keyword_pool, min(n_keyword, len(keyword_pool)))
    taken_other = rng.sample(other_pool, min(n_other, len(other_pool)))
    if len(taken_kw) < n_keyword or len(taken_other) < n_other:
        warnings.warn(
            f"pool smaller than request: drew {len(taken_kw)}/{n_keyword} keyword and "
            f"{len(taken_other)}/{n_other} non-keyword sentences",
            stacklevel=2,
        )
    return taken_kw + taken_other


@dataclass(frozen=True)
class AnnotationSet:
    """All annotator labels collected for one sentence."""

    sentence_id: str
    labels: Mapping[str, LabelPair]

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValidationError("annotation set needs at least one annotator")
        object.__setattr__(self, "labels", dict(self.labels))

    def to_dict(self) -> dict:
        return {
            "sentence_id": self.sentence_id,
            "annotations": {a: lp.to_dict() for a, lp in sorted(self.labels.items())},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AnnotationSet":
        return cls(
            sentence_id=d["sentence_id"],
            labels={a: LabelPair.from_dict(v) for a, v in d["annotations"].items()},
        )


def aggregate_labels(ann: AnnotationSet) -> tuple[LabelPair, tuple[bool, bool]]:
    """Per-label strict majority vote.

    Even vote splits set the tie flag and leave the gold label at False: ties
    are surfaced for manual adjudication, never silently resolved.
    """
    def vote(values: list[bool]) -> tuple[bool, bool]:
        pos = sum(values)
        neg = len(values) - pos
        if pos == neg:
            return False, True
        return pos > neg, False

    votes = list(ann.labels.values())
    challenge, challenge_tie = vote([v.challenge for v in votes])
    direction, direction_tie = vote([v.direction for v in votes])
    return LabelPair(challenge=challenge, direction=direction), (challenge_tie, direction_tie)


def _binary_f1(tp: int, fp: int, fn: int) -> float:
    if tp == 0 and fp == 0 and fn == 0:
        # Both annotators marked nothing positive: perfect agreement on absence.
        return 1.0
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


@dataclass(frozen=True)
class AgreementResult:
    micro_f1: float
    macro_f1: float
    challenge_f1: float
    direction_f1: float

    def to_dict(self) -> dict:
        return {
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "challenge_f1": self.challenge_f1,
            "direction_f1": self.direction_f1,
        }


def pairwise_agreement(
    a: Mapping[str, LabelPair], b: Mapping[str, LabelPair]
) -> AgreementResult:
    """F1 agreement between two labelings of the same sentences, ``a`` as gold.

    Micro-F1 pools TP/FP/FN over both labels; macro-F1 averages the two
    per-label F1s.  A label positive in neither labeling counts as F1 = 1.0.
    """
    if set(a.keys()) != set(b.keys()):
        raise AlignmentError("annotators labeled different sentence sets")
    counts = {"challenge": [0, 0, 0], "direction": [0, 0, 0]}  # tp, fp, fn
    for sid in a:
        for label in ("challenge", "direction"):
            gold = getattr(a[sid], label)
            pred = getattr(b[sid], label)
            c = counts[label]
            if pred and gold:
                c[0] += 1
            elif pred and not gold:
                c[1] += 1
            elif gold and not pred:
                c[2] += 1
    ch_f1 = _binary_f1(*counts["challenge"])
    dr_f1 = _binary_f1(*counts["direction"])
    pooled = [counts["challenge"][i] + counts["direction"][i] for i in range(3)]
    return AgreementResult(
        micro_f1=_binary_f1(*pooled),
        macro_f1=(ch_f1 + dr_f1) / 2.0,
        challenge_f1=ch_f1,
        direction_f1=dr_f1,
    )


SPLIT_NAMES = ("train", "dev", "test")

JOINT_CLASSES = ("neither", "direction_only", "challenge_only", "both")


def joint_class(gold: LabelPair) -> str:
    return JOINT_CLASSES[2 * int(gold.challenge) + int(gold.direction)]


@dataclass(frozen=True)
class SplitAssignment:
    """Total, paper-disjoint partition of sentences into train/dev/test."""

    assignment: Mapping[str, str]
    paper_of: Mapping[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "assignment", dict(self.assignment))
        object.__setattr__(self, "paper_of", dict(self.paper_of))
        paper_splits: dict[str, str] = {}
        for sid, split in self.assignment.items():
            if split not in SPLIT_NAMES:
                raise ValidationError(f"unknown split {split!r}")
            pid = self.paper_of[sid]
            if paper_splits.setdefault(pid, split) != split:
                raise ValidationError(f"paper {pid} assigned to multiple splits")

    def split_of_paper(self, paper_id: str) -> str:
        for sid, split in self.assignment.items():
            if self.paper_of[sid] == paper_id:
                return split
        raise KeyError(paper_id)

    def sentence_ids(self, split: str) -> list[str]:
        return sorted(sid for sid, s in self.assignment.items() if s == split)


def stratified_split(
    examples: Sequence[tuple[str, str, LabelPair]],
    ratios: tuple[float, float, float] = (0.4, 0.1, 0.5),
    seed: int = 0,
) -> SplitAssignment:
    """Greedy paper-disjoint stratified split.

    Whole papers are assigned to train/dev/test so that each split tracks its
    target share of the global 4-class joint-label distribution.  Papers are
    placed largest-first by the least-squares gap to per-split class targets,
    then a local repair pass moves single papers while that reduces total
    deviation.  Deterministic given the seed (which only breaks ordering
    ties).
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError("split ratios must sum to 1")
    if any(r <= 0 for r in ratios):
        raise ValidationError("split ratios must be positive")

    by_paper: dict[str, list[int]] = {}
    for sid, pid, gold in examples:
        vec = by_paper.setdefault(pid, [0, 0, 0, 0])
        vec[2 * int(gold.challenge) + int(gold.direction)] += 1
    if len(by_paper) < len(SPLIT_NAMES):
        raise ValidationError(
            f"need at least {len(SPLIT_NAMES)} distinct papers, got {len(by_paper)}"
        )

    global_counts = [0, 0, 0, 0]
    for vec in by_paper.values():
        for k in range(4):
            global_counts[k] += vec[k]
    targets = [[r * global_counts[k] for k in range(4)] for r in ratios]

    papers = sorted(by_paper)
    rng = random.Random(seed)
    rng.shuffle(papers)
    papers.sort(key=lambda p: -sum(by_paper[p]))  # stable: seed order breaks size ties

    counts = [[0.0, 0.0, 0.0, 0.0] for _ in SPLIT_NAMES]
    where: dict[str, int] = {}

    def marginal_cost(s: int, vec: list[int]) -> float:
        c, t = counts[s], targets[s]
        return sum((c[k] + vec[k] - t[k]) ** 2 - (c[k] - t[k]) ** 2 for k in range(4))

    for pid in papers:
        vec = by_paper[pid]
        s = min(range(len(SPLIT_NAMES)), key=lambda i: (marginal_cost(i, vec), i))
        where[pid] = s
        for k in range(4):
            counts[s][k] += vec[k]

    # Repair pass: relocate single papers while total squared deviation drops.
    def total_dev() -> float:
        return sum(
            (counts[s][k] - targets[s][k]) ** 2 for s in range(len(SPLIT_NAMES)) for k in range(4)
        )

    for _ in range(10):
        improved = False
        for pid in sorted(where, key=lambda p: (sum(by_paper[p]), p)):
            vec = by_paper[pid]
            cur = where[pid]
            before = total_dev()
            best, best_dev = cur, before
            for s in range(len(SPLIT_NAMES)):
                if s == cur:
                    continue
                for k in range(4):
                    counts[cur][k] -= vec[k]
                    counts[s][k] += vec[k]
                dev = total_dev()
                if dev < best_dev - 1e-12:
                    best, best_dev = s, dev
                for k in range(4):
                    counts[cur][k] += vec[k]
                    counts[s][k] -= vec[k]
            if best != cur:
                for k in range(4):
                    counts[cur][k] -= vec[k]
                    counts[best][k] += vec[k]
                where[pid] = best
                improved = True
        if not improved:
            break

    assignment = {sid: SPLIT_NAMES[where[pid]] for sid, pid, _ in examples}
    paper_of = {sid: pid for sid, pid, _ in examples}
    return SplitAssignment(assignment=assignment, paper_of=paper_of)


def label_distribution(
    examples: Sequence[tuple[str, str, LabelPair]],
    assignment: Optional[SplitAssignment] = None,
) -> dict[str, dict[str, int]]:
    """Counts over the four joint label classes, per split and in total."""
    out: dict[str, dict[str, int]] = {"total": {c: 0 for c in JOINT_CLASSES}}
    if assignment is not None:
        for split in SPLIT_NAMES:
            out[split] = {c: 0 for c in JOINT_CLASSES}
    for sid, _pid, gold in examples:
        cls = joint_class(gold)
        out["total"][cls] += 1
        if assignment is not None:
            out[assignment.assignment[sid]][cls] += 1
    return out
