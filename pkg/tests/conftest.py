import random
from pathlib import Path

import numpy as np
import pytest

from phishlens.corpus import PHISHING, SAFE, EmailRecord, LabeledCorpus
from phishlens.model import ModelConfig, init_parameters
from phishlens.tokenizer import TokenSequence, load_vocabulary

DATA = Path(__file__).parent / "data"

PHISH_WORDS = [
    "free", "winner", "click", "prize", "urgent", "claim",
    "money", "verify", "account", "link", "cash", "win",
]
SAFE_WORDS = [
    "meeting", "schedule", "report", "lunch", "project", "team",
    "budget", "review", "agenda", "planning", "status", "monday",
]
FILLER_WORDS = ["the", "to", "and", "a", "please", "now", "today", "new"]


@pytest.fixture(scope="session")
def vocab():
    return load_vocabulary(str(DATA / "vocab_small.txt"))


@pytest.fixture(scope="session")
def toy_config(vocab):
    return ModelConfig(
        vocab_size=vocab.size,
        max_positions=32,
        hidden_dim=16,
        num_heads=2,
        num_layers=1,
        ffn_dim=32,
        dropout_rate=0.0,
    )


@pytest.fixture(scope="session")
def toy_params(toy_config):
    return init_parameters(toy_config, seed=7)


def widen_parameters(params, seed=99):
    """Shift parameters off the near-uniform init so gradients are well-scaled."""
    out = params.copy()
    rng = np.random.default_rng(seed)
    for name, t in out.tensors.items():
        if name.endswith(".scale"):
            t += rng.normal(0.0, 0.15, t.shape)
        else:
            t += rng.normal(0.0, 0.25, t.shape)
    return out


def make_seq(ids, n_real, max_len):
    ids = list(ids)[:max_len] + [0] * max(0, max_len - len(ids))
    mask = [1] * n_real + [0] * (max_len - n_real)
    return TokenSequence(
        input_ids=tuple(ids), attention_mask=tuple(mask), tokens=tuple("t" * n_real)
    )


def toy_batch(max_len=8):
    return [
        make_seq([2, 5, 9, 17, 3, 0, 0, 0], 5, max_len),
        make_seq([2, 44, 3, 0, 0, 0, 0, 0], 3, max_len),
    ]


def synthetic_corpus(n_records, seed):
    """Keyword-separable emails: phishing/safe draw from disjoint lexicons."""
    rng = random.Random(seed)
    records = []
    for i in range(n_records):
        label = PHISHING if i % 2 else SAFE
        lexicon = PHISH_WORDS if label == PHISHING else SAFE_WORDS
        n_words = rng.randint(4, 8)
        words = [rng.choice(lexicon) for _ in range(n_words)]
        words += [rng.choice(FILLER_WORDS) for _ in range(rng.randint(1, 3))]
        rng.shuffle(words)
        records.append(EmailRecord(body=" ".join(words), label=label))
    return LabeledCorpus.from_records(records)
