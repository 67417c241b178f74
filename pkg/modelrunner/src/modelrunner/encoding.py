"""Deterministic tokenization and the two context encodings.

Tokens map to ids by a stable content hash, so no vocabulary file is needed
and encodings are identical across runs and machines.
"""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass
from typing import Optional

PAD_ID = 0
CLS_ID = 1
SEP_ID = 2
N_SPECIAL = 3

_EDGE_PUNCT = ".,;:!?()[]{}\"'`"


def tokenize(text: str) -> list[str]:
    out = []
    for raw in unicodedata.normalize("NFC", text).lower().split():
        stripped = raw.strip(_EDGE_PUNCT)
        if stripped:
            out.append(stripped)
    return out


def token_id(token: str, vocab_size: int) -> int:
    digest = hashlib.sha1(token.encode("utf-8")).digest()
    value = int.from_bytes(digest[:8], "big")
    return N_SPECIAL + value % (vocab_size - N_SPECIAL)


@dataclass(frozen=True)
class EncodedInput:
    ids: list[int]

    def padded(self, length: int) -> tuple[list[int], list[int]]:
        ids = self.ids[:length]
        mask = [1] * len(ids) + [0] * (length - len(ids))
        return ids + [PAD_ID] * (length - len(ids)), mask


def encode_sentence(text: str, vocab_size: int, max_len: int) -> EncodedInput:
    """Sentence-only input: [CLS] tokens [SEP]."""
    ids = [CLS_ID] + [token_id(t, vocab_size) for t in tokenize(text)] + [SEP_ID]
    return EncodedInput(ids=ids[:max_len])


def encode_context(
    text: str,
    prev_text: Optional[str],
    next_text: Optional[str],
    vocab_size: int,
    max_len: int,
) -> EncodedInput:
    """Full-context input: [CLS] prev [SEP] sentence [SEP] next [SEP].

    A missing neighbour becomes an empty segment, keeping the separator
    structure fixed.
    """
    def seg(t: Optional[str]) -> list[int]:
        return [token_id(tok, vocab_size) for tok in tokenize(t)] if t else []

    ids = [CLS_ID] + seg(prev_text) + [SEP_ID] + seg(text) + [SEP_ID] + seg(next_text) + [SEP_ID]
    return EncodedInput(ids=ids[:max_len])


def encode_pair(premise: str, hypothesis: str, vocab_size: int, max_len: int) -> EncodedInput:
    """NLI-style input: [CLS] premise [SEP] hypothesis [SEP]."""
    def seg(t: str) -> list[int]:
        return [token_id(tok, vocab_size) for tok in tokenize(t)]

    ids = [CLS_ID] + seg(premise) + [SEP_ID] + seg(hypothesis) + [SEP_ID]
    return EncodedInput(ids=ids[:max_len])
