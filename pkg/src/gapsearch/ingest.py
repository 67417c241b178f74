"""Corpus streaming, sentence cleaning and context-window construction."""

from __future__ import annotations

import json
import unicodedata
from dataclasses import dataclass, field
from typing import IO, Iterator, Optional

from .errors import CorpusFormatError, ValidationError
from .records import PaperRecord, SentenceRecord, token_count

# Small built-in English stopword list: enough for the stopword-ratio
# language heuristic, deterministic and dependency-free.
ENGLISH_STOPWORDS = frozenset(
    """a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing down
    during each few for from further had has have having he her here hers him his
    how i if in into is it its itself just me more most my myself no nor not of
    off on once only or other our ours out over own same she should so some such
    than that the their theirs them then there these they this those through to
    too under until up very was we were what when where which while who whom why
    will with would you your yours""".split()
)

REASONS = ("too_short", "too_long", "non_english", "numeric_mathematical", "latex_or_garbled", "ok")

DEFAULT_LATEX_MARKERS = ("\\frac", "\\begin", "\\cite", "$$", "\\alpha")


@dataclass(frozen=True)
class FilterVerdict:
    keep: bool
    reason: str

    def __post_init__(self) -> None:
        if self.reason not in REASONS:
            raise ValidationError(f"unknown filter reason {self.reason!r}")
        if self.keep != (self.reason == "ok"):
            raise ValidationError("keep flag inconsistent with reason")


@dataclass(frozen=True)
class CleaningConfig:
    """Bounds for the sentence filters.

    The source method only says sentences that are "very short/long", contain
    latex, are mostly numeric or are not English get dropped; the concrete
    bounds here are our documented defaults and all of them are overridable.
    """

    min_tokens: int = 6
    max_tokens: int = 128
    stopword_ratio_min: float = 0.05
    digit_symbol_ratio_max: float = 0.5
    latex_markers: tuple[str, ...] = DEFAULT_LATEX_MARKERS

    def __post_init__(self) -> None:
        if self.min_tokens < 1:
            raise ValidationError("min_tokens must be >= 1")
        if self.min_tokens >= self.max_tokens:
            raise ValidationError("min_tokens must be < max_tokens")
        for name in ("stopword_ratio_min", "digit_symbol_ratio_max"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValidationError(f"{name} must lie in [0,1]")
        object.__setattr__(self, "latex_markers", tuple(self.latex_markers))


@dataclass
class CleaningReport:
    """Per-reason rejection histogram; kept + rejected == total seen."""

    kept: int = 0
    rejected: dict = field(default_factory=dict)

    @property
    def total(self) -> int:
        return self.kept + sum(self.rejected.values())

    def record(self, verdict: FilterVerdict) -> None:
        if verdict.keep:
            self.kept += 1
        else:
            self.rejected[verdict.reason] = self.rejected.get(verdict.reason, 0) + 1

    def to_dict(self) -> dict:
        return {"total": self.total, "kept": self.kept, "rejected": dict(sorted(self.rejected.items()))}


class CorpusParser:
    """Lazy reader over a line-delimited corpus stream.

    Malformed lines are skipped and counted rather than fatal, but a stream
    where more than half the nonempty lines are malformed is treated as the
    wrong format and raises ``CorpusFormatError`` at exhaustion.
    """

    def __init__(self, stream: IO):
        self._stream = stream
        self.skipped = 0
        self.total = 0

    def __iter__(self) -> Iterator[PaperRecord]:
        for line in self._stream:
            if isinstance(line, bytes):
                line = line.decode("utf-8", errors="replace")
            line = line.strip()
            if not line:
                continue
            self.total += 1
            try:
                record = PaperRecord.from_dict(json.loads(line))
            except (json.JSONDecodeError, KeyError, TypeError, ValidationError):
                self.skipped += 1
                continue
            yield record
        if self.total and self.skipped / self.total > 0.5:
            raise CorpusFormatError(
                f"{self.skipped}/{self.total} lines malformed; not a paper-record corpus"
            )


def parse_corpus(stream: IO) -> CorpusParser:
    return CorpusParser(stream)


def _digit_symbol_ratio(text: str) -> float:
    chars = [c for c in text if not c.isspace()]
    if not chars:
        return 1.0
    non_alpha = sum(1 for c in chars if not c.isalpha())
    return non_alpha / len(chars)


def _stopword_ratio(tokens: list[str]) -> float:
    if not tokens:
        return 0.0
    hits = sum(1 for t in tokens if t.strip(".,;:!?()[]{}\"'").lower() in ENGLISH_STOPWORDS)
    return hits / len(tokens)


def clean_filter(text: str, cfg: CleaningConfig) -> FilterVerdict:
    """Apply the cleaning checks in fixed order: length, latex, numeric, language."""
    normalized = unicodedata.normalize("NFC", text)
    tokens = normalized.split()
    if len(tokens) < cfg.min_tokens:
        return FilterVerdict(False, "too_short")
    if len(tokens) > cfg.max_tokens:
        return FilterVerdict(False, "too_long")
    for marker in cfg.latex_markers:
        if marker in normalized:
            return FilterVerdict(False, "latex_or_garbled")
    if _digit_symbol_ratio(normalized) > cfg.digit_symbol_ratio_max:
        return FilterVerdict(False, "numeric_mathematical")
    if _stopword_ratio(tokens) < cfg.stopword_ratio_min:
        return FilterVerdict(False, "non_english")
    return FilterVerdict(True, "ok")


def build_context_windows(
    paper: PaperRecord,
    cfg: Optional[CleaningConfig] = None,
    report: Optional[CleaningReport] = None,
) -> list[SentenceRecord]:
    """One SentenceRecord per kept sentence, with raw +/-1 sentence context.

    Context is informational: neighbours that were themselves filtered out as
    candidates still appear as prev/next text.  Boundary sentences get absent
    context on the missing side.  Pass ``cfg=None`` to keep every sentence.
    """
    records = []
    n = len(paper.sentences)
    for pos, text in enumerate(paper.sentences):
        if cfg is not None:
            verdict = clean_filter(text, cfg)
            if report is not None:
                report.record(verdict)
            if not verdict.keep:
                continue
        elif report is not None:
            report.record(FilterVerdict(True, "ok"))
        records.append(
            SentenceRecord.build(
                paper_id=paper.paper_id,
                position=pos,
                text=text,
                prev_text=paper.sentences[pos - 1] if pos > 0 else None,
                next_text=paper.sentences[pos + 1] if pos < n - 1 else None,
            )
        )
    return records


def ingest_corpus(
    stream: IO, cfg: Optional[CleaningConfig] = None
) -> tuple[list[SentenceRecord], CleaningReport, CorpusParser]:
    """Run the full ingestion pass: parse, filter, attach context windows."""
    cfg = cfg if cfg is not None else CleaningConfig()
    report = CleaningReport()
    parser = parse_corpus(stream)
    out: list[SentenceRecord] = []
    for paper in parser:
        out.extend(build_context_windows(paper, cfg, report))
    return out, report, parser
