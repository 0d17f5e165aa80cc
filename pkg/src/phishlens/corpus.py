"""Email corpus loading, class balancing, and train/test splitting.

Input format: comma-delimited text with a header row and double-quote
quoting (email bodies span lines and contain commas). Label strings are
matched case-insensitively after trimming; Safe=0, Phishing=1.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

SAFE, PHISHING = 0, 1
LABEL_NAMES = {SAFE: "Safe Email", PHISHING: "Phishing Email"}
_LABEL_ALIASES = {"safe email": SAFE, "phishing email": PHISHING}

DEFAULT_TEXT_COLUMN = "Email Text"
DEFAULT_LABEL_COLUMN = "Email Type"


class EmptyCorpusError(ValueError):
    """Raised when a source yields zero usable records."""


class BalanceError(ValueError):
    """Raised when oversampling is impossible (a class is absent)."""


@dataclass(frozen=True)
class EmailRecord:
    body: str
    label: int

    def __post_init__(self):
        if not self.body.strip():
            raise ValueError("EmailRecord body must be non-empty")
        if self.label not in (SAFE, PHISHING):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


@dataclass(frozen=True)
class LabeledCorpus:
    records: tuple[EmailRecord, ...]
    class_counts: dict[int, int]
    dropped_rows: int = 0

    @classmethod
    def from_records(cls, records: Sequence[EmailRecord], dropped_rows: int = 0) -> "LabeledCorpus":
        counts = {SAFE: 0, PHISHING: 0}
        for rec in records:
            counts[rec.label] += 1
        return cls(records=tuple(records), class_counts=counts, dropped_rows=dropped_rows)

    def __len__(self) -> int:
        return len(self.records)

    def recount(self) -> dict[int, int]:
        counts = {SAFE: 0, PHISHING: 0}
        for rec in self.records:
            counts[rec.label] += 1
        return counts

    def check_invariants(self) -> None:
        if self.recount() != self.class_counts:
            raise AssertionError("class_counts inconsistent with records")

    def summary(self, seed: int | None = None) -> dict:
        return {
            "counts": {LABEL_NAMES[k]: v for k, v in sorted(self.class_counts.items())},
            "dropped_rows": self.dropped_rows,
            "seed": seed,
        }

    def summary_json(self, seed: int | None = None) -> str:
        return json.dumps(self.summary(seed), indent=2)


@dataclass(frozen=True)
class SplitCorpus:
    train: LabeledCorpus
    test: LabeledCorpus
    train_fraction: float
    seed: int = field(default=0)


def _is_null_body(cell: str | None) -> bool:
    # Missing cell or whitespace-only body counts as null.
    return cell is None or not cell.strip()


def load_corpus(
    path: str,
    text_column: str = DEFAULT_TEXT_COLUMN,
    label_column: str = DEFAULT_LABEL_COLUMN,
) -> LabeledCorpus:
    """Read a labeled email table, dropping null-body and unknown-label rows.

    Raises OSError for unreadable files and EmptyCorpusError when no row
    survives cleaning. Unknown label strings reject the row (counted in
    dropped_rows) without aborting the load.
    """
    records: list[EmailRecord] = []
    dropped = 0
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyCorpusError(f"{path}: empty file, no header row")
        if text_column not in reader.fieldnames or label_column not in reader.fieldnames:
            raise ValueError(
                f"{path}: expected columns {text_column!r} and {label_column!r}, "
                f"found {reader.fieldnames}"
            )
        for row in reader:
            body = row.get(text_column)
            raw_label = row.get(label_column)
            if _is_null_body(body) or raw_label is None:
                dropped += 1
                continue
            label = _LABEL_ALIASES.get(raw_label.strip().lower())
            if label is None:
                dropped += 1
                continue
            records.append(EmailRecord(body=body, label=label))
    if not records:
        raise EmptyCorpusError(f"{path}: zero usable rows after cleaning")
    return LabeledCorpus.from_records(records, dropped_rows=dropped)


def oversample_minority(corpus: LabeledCorpus, seed: int) -> LabeledCorpus:
    """Duplicate minority-class records (with replacement) until classes match.

    Originals are all retained in order; copies are appended. A corpus whose
    classes are already equal passes through unchanged, making the operation
    idempotent.
    """
    counts = corpus.class_counts
    if counts[SAFE] == 0 or counts[PHISHING] == 0:
        raise BalanceError(f"cannot balance: class counts {counts}")
    if counts[SAFE] == counts[PHISHING]:
        return corpus
    minority = SAFE if counts[SAFE] < counts[PHISHING] else PHISHING
    deficit = abs(counts[SAFE] - counts[PHISHING])
    minority_idx = [i for i, rec in enumerate(corpus.records) if rec.label == minority]
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(minority_idx), size=deficit, replace=True)
    copies = [corpus.records[minority_idx[int(i)]] for i in picks]
    return LabeledCorpus.from_records(
        list(corpus.records) + copies, dropped_rows=corpus.dropped_rows
    )


def split(corpus: LabeledCorpus, train_fraction: float, seed: int) -> SplitCorpus:
    """Seeded shuffle, then first floor(fraction * N) records to train."""
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be in (0, 1], got {train_fraction}")
    n = len(corpus.records)
    if n == 0:
        raise EmptyCorpusError("cannot split an empty corpus")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    n_train = int(np.floor(train_fraction * n))
    train_recs = [corpus.records[int(i)] for i in order[:n_train]]
    test_recs = [corpus.records[int(i)] for i in order[n_train:]]
    return SplitCorpus(
        train=LabeledCorpus.from_records(train_recs, dropped_rows=corpus.dropped_rows),
        test=LabeledCorpus.from_records(test_recs),
        train_fraction=train_fraction,
        seed=seed,
    )
