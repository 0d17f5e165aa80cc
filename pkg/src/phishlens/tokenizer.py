"""WordPiece tokenization with special tokens, padding, and truncation.

The greedy matching inner loop lives in a swappable kernel module: the
compiled extension `phishlens._wordpiece` when built, else the pure-Python
fallback. Set PHISHLENS_PURE_WORDPIECE=1 to force the fallback.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

if os.environ.get("PHISHLENS_PURE_WORDPIECE"):
    from . import _wordpiece_py as _kernel
else:
    try:
        from . import _wordpiece as _kernel  # type: ignore[attr-defined]
    except ImportError:
        from . import _wordpiece_py as _kernel

PAD, UNK, CLS, SEP, MASK = "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"
SPECIAL_TOKENS = (PAD, UNK, CLS, SEP, MASK)

MAX_WORD_CHARS = 100


def wordpiece_backend() -> str:
    """Which kernel is active: "compiled" or "pure"."""
    return _kernel.BACKEND


class VocabularyError(ValueError):
    """Raised for malformed vocabulary files (duplicates, missing specials)."""


@dataclass(frozen=True)
class Vocabulary:
    token_to_id: dict[str, int]
    id_to_token: tuple[str, ...]

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    @property
    def pad_id(self) -> int:
        return self.token_to_id[PAD]

    @property
    def unk_id(self) -> int:
        return self.token_to_id[UNK]

    @property
    def cls_id(self) -> int:
        return self.token_to_id[CLS]

    @property
    def sep_id(self) -> int:
        return self.token_to_id[SEP]

    @property
    def mask_id(self) -> int:
        return self.token_to_id[MASK]

    def dump_json(self) -> str:
        return json.dumps([{"token": t, "id": i} for i, t in enumerate(self.id_to_token)])


@dataclass(frozen=True)
class TokenSequence:
    """Fixed-length encoding: ids and mask padded to max_len, tokens unpadded."""

    input_ids: tuple[int, ...]
    attention_mask: tuple[int, ...]
    tokens: tuple[str, ...]

    @property
    def real_length(self) -> int:
        return sum(self.attention_mask)


def load_vocabulary(path: str) -> Vocabulary:
    """One token per line; 0-based line number is the token id."""
    tokens: list[str] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            token = line.rstrip("\r\n")
            if not token:
                raise VocabularyError(f"{path}: blank line at id {len(tokens)}")
            tokens.append(token)
    token_to_id = {tok: i for i, tok in enumerate(tokens)}
    if len(token_to_id) != len(tokens):
        raise VocabularyError(f"{path}: duplicate tokens present")
    missing = [s for s in SPECIAL_TOKENS if s not in token_to_id]
    if missing:
        raise VocabularyError(f"{path}: missing special tokens {missing}")
    return Vocabulary(token_to_id=token_to_id, id_to_token=tuple(tokens))


def wordpiece_tokenize(text: str, vocab: Vocabulary) -> list[str]:
    """Lowercase/split text and greedily decompose each word into pieces."""
    pieces: list[str] = []
    for word in _kernel.pretokenize(text):
        pieces.extend(_kernel.split_word(word, vocab.token_to_id, UNK, MAX_WORD_CHARS))
    return pieces


def encode(text: str, vocab: Vocabulary, max_len: int) -> TokenSequence:
    """[CLS] + pieces + [SEP], truncated from the end, padded to max_len."""
    if max_len < 2:
        raise ValueError(f"max_len must be >= 2, got {max_len}")
    pieces = wordpiece_tokenize(text, vocab)[: max_len - 2]
    tokens = [CLS] + pieces + [SEP]
    ids = [vocab.token_to_id[t] for t in tokens]
    n_real = len(ids)
    ids.extend([vocab.pad_id] * (max_len - n_real))
    mask = [1] * n_real + [0] * (max_len - n_real)
    return TokenSequence(
        input_ids=tuple(ids), attention_mask=tuple(mask), tokens=tuple(tokens)
    )


def encode_corpus(texts, vocab: Vocabulary, max_len: int) -> list[TokenSequence]:
    return [encode(t, vocab, max_len) for t in texts]
