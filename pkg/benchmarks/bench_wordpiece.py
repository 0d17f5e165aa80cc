#!/usr/bin/env python3
"""Benchmark the WordPiece kernels: compiled extension vs pure Python.

Generates a synthetic email corpus, splits every word through each available
kernel, and reports throughput. Run from the repository root:

    python benchmarks/bench_wordpiece.py [--emails 2000] [--words 120]
"""

import argparse
import random
import string
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from phishlens import _wordpiece_py  # noqa: E402

try:
    from phishlens import _wordpiece as _compiled
except ImportError:
    _compiled = None


def build_vocab(rng, n_pieces=8000):
    vocab = {}
    for ch in string.ascii_lowercase + string.digits:
        vocab[ch] = len(vocab)
        vocab["##" + ch] = len(vocab)
    while len(vocab) < n_pieces:
        piece = "".join(rng.choices(string.ascii_lowercase, k=rng.randint(2, 7)))
        if rng.random() < 0.55:
            piece = "##" + piece
        if piece not in vocab:
            vocab[piece] = len(vocab)
    return vocab


def build_corpus(rng, n_emails, words_per_email):
    corpus = []
    for _ in range(n_emails):
        words = []
        for _ in range(words_per_email):
            words.append("".join(rng.choices(string.ascii_lowercase, k=rng.randint(2, 12))))
        corpus.append(" ".join(words))
    return corpus


def run(kernel, corpus, vocab):
    start = time.perf_counter()
    n_pieces = 0
    for email in corpus:
        for word in kernel.pretokenize(email):
            n_pieces += len(kernel.split_word(word, vocab, "[UNK]", 100))
    elapsed = time.perf_counter() - start
    return elapsed, n_pieces


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--emails", type=int, default=2000)
    parser.add_argument("--words", type=int, default=120)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    vocab = build_vocab(rng)
    corpus = build_corpus(rng, args.emails, args.words)
    total_words = args.emails * args.words
    print(f"corpus: {args.emails} emails x {args.words} words, vocab {len(vocab)} pieces")

    pure_time, pure_pieces = run(_wordpiece_py, corpus, vocab)
    print(f"pure python : {pure_time:8.3f}s  {total_words / pure_time:10.0f} words/s  "
          f"({pure_pieces} pieces)")

    if _compiled is None:
        print("compiled    : not built (python setup.py build_ext --inplace)")
        return

    comp_time, comp_pieces = run(_compiled, corpus, vocab)
    print(f"compiled    : {comp_time:8.3f}s  {total_words / comp_time:10.0f} words/s  "
          f"({comp_pieces} pieces)")
    if comp_pieces != pure_pieces:
        raise SystemExit("kernel outputs diverged; run the parity tests")
    print(f"speedup     : {pure_time / comp_time:.2f}x")


if __name__ == "__main__":
    main()
