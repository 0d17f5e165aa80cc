# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled WordPiece hot path: pre-tokenization and greedy matching.

Semantics must stay exactly aligned with phishlens._wordpiece_py; the parity
test compares the two on randomized inputs. ASCII characters are classified
with plain integer comparisons, everything else falls back to unicodedata.
"""

import unicodedata

BACKEND = "compiled"


cdef inline bint _ascii_punct(Py_UCS4 ch):
    cdef int cp = <int> ch
    return (33 <= cp <= 47) or (58 <= cp <= 64) or (91 <= cp <= 96) or (123 <= cp <= 126)


cdef bint _is_punctuation(Py_UCS4 ch):
    cdef int cp = <int> ch
    if cp < 128:
        return _ascii_punct(ch)
    return unicodedata.category(ch).startswith("P")


cdef bint _is_whitespace(Py_UCS4 ch):
    cdef int cp = <int> ch
    if cp == 32 or cp == 9 or cp == 10 or cp == 13:
        return True
    if cp < 128:
        return False
    return unicodedata.category(ch) == "Zs"


cdef bint _is_control(Py_UCS4 ch):
    cdef int cp = <int> ch
    if cp == 9 or cp == 10 or cp == 13:
        return False
    if cp < 32 or cp == 127:
        return True
    if cp < 128:
        return False
    return unicodedata.category(ch).startswith("C")


cdef inline bint _skip(Py_UCS4 ch):
    cdef int cp = <int> ch
    if cp < 128:
        return _is_control(ch)
    return unicodedata.category(ch) == "Mn" or _is_control(ch)


def pretokenize(str text):
    """Lowercase, strip accents, and split into words and standalone punctuation."""
    cdef str normalized = unicodedata.normalize("NFD", text.lower())
    cdef list tokens = []
    cdef list current = []
    cdef Py_UCS4 ch
    for ch in normalized:
        if _skip(ch):
            continue
        if _is_whitespace(ch):
            if current:
                tokens.append("".join(current))
                current = []
        elif _is_punctuation(ch):
            if current:
                tokens.append("".join(current))
                current = []
            tokens.append(chr(ch))
        else:
            current.append(chr(ch))
    if current:
        tokens.append("".join(current))
    return tokens


def split_word(str word, dict token_to_id, str unk_token, int max_chars):
    """Greedy longest-prefix-match decomposition of one word.

    Continuation pieces carry the "##" prefix. A word with no full
    decomposition (or longer than max_chars) collapses to the unknown token.
    """
    cdef Py_ssize_t n = len(word)
    if n > max_chars:
        return [unk_token]
    cdef list pieces = []
    cdef Py_ssize_t start = 0
    cdef Py_ssize_t end
    cdef str sub
    cdef object found
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
