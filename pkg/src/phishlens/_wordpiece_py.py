"""Pure-Python WordPiece hot path: pre-tokenization and greedy matching.

`phishlens._wordpiece` (Cython) implements the same two functions; the
tokenizer picks whichever is importable. Keep the semantics of this module
and the compiled twin exactly aligned - the parity test enforces it.
"""

from __future__ import annotations

import unicodedata

BACKEND = "pure"


def _is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    # ASCII non-alphanumerics count as punctuation even when Unicode says
    # otherwise ($, `, ^ ...), so URLs and code-ish text split predictably.
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def _is_whitespace(ch: str) -> bool:
    if ch in (" ", "\t", "\n", "\r"):
        return True
    return unicodedata.category(ch) == "Zs"


def _is_control(ch: str) -> bool:
    if ch in ("\t", "\n", "\r"):
        return False
    return unicodedata.category(ch).startswith("C")


def pretokenize(text: str) -> list[str]:
    """Lowercase, strip accents, and split into words and standalone punctuation."""
    text = unicodedata.normalize("NFD", text.lower())
    tokens: list[str] = []
    current: list[str] = []
    for ch in text:
        if unicodedata.category(ch) == "Mn" or _is_control(ch):
            continue
        if _is_whitespace(ch):
            if current:
                tokens.append("".join(current))
                current = []
        elif _is_punctuation(ch):
            if current:
                tokens.append("".join(current))
                current = []
            tokens.append(ch)
        else:
            current.append(ch)
    if current:
        tokens.append("".join(current))
    return tokens


def split_word(word: str, token_to_id: dict, unk_token: str, max_chars: int) -> list[str]:
    """Greedy longest-prefix-match decomposition of one word.

    Continuation pieces carry the "##" prefix. A word with no full
    decomposition (or longer than max_chars) collapses to the unknown token.
    """
    n = len(word)
    if n > max_chars:
        return [unk_token]
    pieces: list[str] = []
    start = 0
    while start < n:
        end = n
        found = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = "##" + sub
            if sub in token_to_id:
                found = sub
                break
            end -= 1
        if found is None:
            return [unk_token]
        pieces.append(found)
        start = end
    return pieces
