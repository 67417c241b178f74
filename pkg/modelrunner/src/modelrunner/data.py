"""Dataset loading for training and inference.

Input files are the pipeline's sentence JSON-lines records, optionally with
gold labels attached (either flat ``challenge``/``direction`` booleans or a
nested ``gold`` object).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional


@dataclass(frozen=True)
class Example:
    sentence_id: str
    paper_id: str
    text: str
    prev_text: Optional[str] = None
    next_text: Optional[str] = None
    challenge: Optional[bool] = None
    direction: Optional[bool] = None

    @property
    def labels(self) -> tuple[float, float]:
        if self.challenge is None or self.direction is None:
            raise ValueError(f"example {self.sentence_id} has no gold labels")
        return (float(self.challenge), float(self.direction))


def parse_example(d: dict) -> Example:
    gold = d.get("gold", d)
    challenge = gold.get("challenge")
    direction = gold.get("direction")
    return Example(
        sentence_id=d["sentence_id"],
        paper_id=d.get("paper_id", ""),
        text=d["text"],
        prev_text=d.get("prev_text"),
        next_text=d.get("next_text"),
        challenge=None if challenge is None else bool(challenge),
        direction=None if direction is None else bool(direction),
    )


def load_examples(path) -> list[Example]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(parse_example(json.loads(line)))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"{path} line {lineno}: {exc}") from exc
    out.sort(key=lambda e: e.sentence_id)
    return out


def dataset_fingerprint(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def check_paper_disjoint(*example_sets: list[Example]) -> None:
    seen: dict[str, int] = {}
    for i, examples in enumerate(example_sets):
        for ex in examples:
            if not ex.paper_id:
                continue
            if seen.setdefault(ex.paper_id, i) != i:
                raise ValueError(f"paper {ex.paper_id} appears in more than one split")
