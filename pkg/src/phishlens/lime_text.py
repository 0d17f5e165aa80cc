"""Word-level local surrogate explanations (LIME) for text classifiers.

Pipeline: index the distinct words of one email, knock random subsets out,
score the perturbed texts with the black-box classifier, weight samples by
proximity to the original, and fit a sparse weighted ridge surrogate whose
coefficients are the explanation.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

_WORD_RE = re.compile(r"\w+", re.UNICODE)

EXHAUSTIVE_LIMIT = 20  # 2^F samples; beyond this enumeration is a mistake


class ClassifierContractError(ValueError):
    """The black box returned something that is not a probability vector."""


class SingularFitError(ValueError):
    """Unregularized fit hit a singular system; retry with ridge_alpha > 0."""


@dataclass
class LimeConfig:
    num_features: int = 15
    num_samples: int = 1000
    kernel_width: float = 25.0
    ridge_alpha: float = 1.0
    seed: int = 0
    class_names: tuple[str, ...] = ("Safe Email", "Phishing Email")
    exhaustive: bool = False

    def __post_init__(self):
        if self.num_features < 1 or self.num_samples < 1:
            raise ValueError("num_features and num_samples must be >= 1")
        if self.kernel_width <= 0:
            raise ValueError("kernel_width must be positive")
        if self.ridge_alpha < 0:
            raise ValueError("ridge_alpha must be non-negative")


@dataclass(frozen=True)
class WordIndex:
    text: str
    distinct_words: tuple[str, ...]
    occurrences: dict[str, tuple[tuple[int, int], ...]]

    def __len__(self) -> int:
        return len(self.distinct_words)


class Perturbation(NamedTuple):
    mask: np.ndarray
    text: str
    distance: float


@dataclass(frozen=True)
class LimeExplanation:
    target_class: int
    weighted_words: tuple[tuple[str, float], ...]
    intercept: float
    local_fit_r2: float
    predicted_probability: float

    def to_dict(self) -> dict:
        return {
            "class": self.target_class,
            "intercept": self.intercept,
            "r2": self.local_fit_r2,
            "features": [{"word": w, "weight": c} for w, c in self.weighted_words],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def build_word_index(text: str) -> WordIndex:
    """Distinct lowercased words and the spans where each occurs."""
    words: list[str] = []
    occ: dict[str, list[tuple[int, int]]] = {}
    for match in _WORD_RE.finditer(text):
        word = match.group().lower()
        if word not in occ:
            occ[word] = []
            words.append(word)
        occ[word].append(match.span())
    return WordIndex(
        text=text,
        distinct_words=tuple(words),
        occurrences={w: tuple(spans) for w, spans in occ.items()},
    )


def _remove_words(index: WordIndex, mask: np.ndarray) -> str:
    spans = []
    for i, word in enumerate(index.distinct_words):
        if mask[i] == 0:
            spans.extend(index.occurrences[word])
    if not spans:
        return index.text
    spans.sort()
    parts = []
    cursor = 0
    for start, end in spans:
        parts.append(index.text[cursor:start])
        cursor = end
    parts.append(index.text[cursor:])
    return "".join(parts)


def _mask_distance(mask: np.ndarray) -> float:
    """Cosine distance to the all-ones mask, scaled by 100.

    For a binary mask with k active of F, the cosine is k/(sqrt(k)*sqrt(F))
    = sqrt(k/F), which is exact (1.0) for the identity mask.
    """
    n_active = float(mask.sum())
    if n_active == 0.0:
        return 100.0
    return float((1.0 - np.sqrt(n_active / mask.size)) * 100.0)


def sample_perturbations(index: WordIndex, n: int, seed: int) -> list[Perturbation]:
    """All-ones first, then n-1 random non-empty deactivation subsets."""
    f = len(index)
    if f == 0:
        raise ValueError("cannot perturb a text with no words")
    ones = np.ones(f, dtype=np.int8)
    samples = [Perturbation(mask=ones, text=index.text, distance=0.0)]
    rng = np.random.default_rng(seed)
    for _ in range(n - 1):
        k = int(rng.integers(1, f + 1))
        off = rng.choice(f, size=k, replace=False)
        mask = ones.copy()
        mask[off] = 0
        samples.append(
            Perturbation(mask=mask, text=_remove_words(index, mask), distance=_mask_distance(mask))
        )
    return samples


def enumerate_perturbations(index: WordIndex) -> list[Perturbation]:
    """Every one of the 2^F masks, all-ones first (for oracle-grade fits)."""
    f = len(index)
    if f == 0:
        raise ValueError("cannot perturb a text with no words")
    if f > EXHAUSTIVE_LIMIT:
        raise ValueError(f"refusing to enumerate 2^{f} masks")
    samples = []
    for bits in itertools.product((1, 0), repeat=f):
        mask = np.array(bits, dtype=np.int8)
        samples.append(
            Perturbation(
                mask=mask,
                text=index.text if mask.all() else _remove_words(index, mask),
                distance=_mask_distance(mask),
            )
        )
    return samples


def kernel_weight(distance: float, width: float) -> float:
    """Locality kernel exp(-d^2 / width^2)."""
    if width <= 0:
        raise ValueError("kernel width must be positive")
    return float(np.exp(-(distance**2) / width**2))


def _weighted_ridge(x, y, weights, alpha):
    """Centered weighted ridge with unpenalized intercept."""
    w_sum = weights.sum()
    x_mean = (weights[:, None] * x).sum(axis=0) / w_sum
    y_mean = float((weights * y).sum() / w_sum)
    xc = x - x_mean
    yc = y - y_mean
    a = xc.T @ (xc * weights[:, None]) + alpha * np.eye(x.shape[1])
    b = xc.T @ (weights * yc)
    try:
        beta = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise SingularFitError(
            "weighted ridge system is singular; set ridge_alpha > 0"
        ) from exc
    intercept = y_mean - float(x_mean @ beta)
    return beta, intercept


def fit_local_model(
    masks: np.ndarray,
    targets: np.ndarray,
    sample_weights: np.ndarray,
    alpha: float,
    k: int,
) -> tuple[list[int], np.ndarray, float, float]:
    """Fit on all features, keep the k largest |coefficient|, refit on those.

    Returns (selected feature indices, coefficients, intercept, weighted r2),
    with indices and coefficients ordered by descending |coefficient|.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    x = np.asarray(masks, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    w = np.asarray(sample_weights, dtype=np.float64)

    beta_full, _ = _weighted_ridge(x, y, w, alpha)
    keep = np.argsort(-np.abs(beta_full), kind="stable")[: min(k, x.shape[1])]
    beta, intercept = _weighted_ridge(x[:, keep], y, w, alpha)

    order = np.argsort(-np.abs(beta), kind="stable")
    selected = [int(keep[i]) for i in order]
    coefficients = beta[order]

    y_hat = intercept + x[:, keep] @ beta
    w_sum = w.sum()
    y_mean = float((w * y).sum() / w_sum)
    rss = float((w * (y - y_hat) ** 2).sum())
    tss = float((w * (y - y_mean) ** 2).sum())
    if tss <= 1e-30:
        r2 = 1.0 if rss <= 1e-30 else 0.0
    else:
        r2 = 1.0 - rss / tss
    return selected, coefficients, float(intercept), r2


def _check_probability_vector(probs: np.ndarray, n_classes: int, context: str) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64).reshape(-1)
    if probs.shape[0] != n_classes:
        raise ClassifierContractError(
            f"{context}: expected {n_classes} class probabilities, got {probs.shape[0]}"
        )
    if (probs < -1e-9).any():
        raise ClassifierContractError(f"{context}: negative probability {probs.min()}")
    if abs(probs.sum() - 1.0) > 1e-3:
        raise ClassifierContractError(f"{context}: probabilities sum to {probs.sum()}")
    return probs


def explain(
    text: str,
    classifier: Callable[[str], Sequence[float]],
    cfg: LimeConfig,
    target: int | None = None,
) -> LimeExplanation:
    """Surrogate explanation of classifier(text) for one class.

    The target defaults to the class the black box predicts for the original
    text. The classifier must map any text to a probability vector over
    cfg.class_names.
    """
    index = build_word_index(text)
    if cfg.exhaustive:
        samples = enumerate_perturbations(index)
    else:
        samples = sample_perturbations(index, cfg.num_samples, cfg.seed)

    n_classes = len(cfg.class_names)
    probs = np.empty((len(samples), n_classes))
    for i, sample in enumerate(samples):
        probs[i] = _check_probability_vector(
            classifier(sample.text), n_classes, f"sample {i}"
        )

    if target is None:
        target = int(probs[0].argmax())

    masks = np.stack([s.mask for s in samples]).astype(np.float64)
    y = probs[:, target]
    weights = np.array([kernel_weight(s.distance, cfg.kernel_width) for s in samples])

    k = min(cfg.num_features, len(index))
    selected, coefficients, intercept, r2 = fit_local_model(
        masks, y, weights, cfg.ridge_alpha, k
    )
    weighted_words = tuple(
        (index.distinct_words[idx], float(c)) for idx, c in zip(selected, coefficients)
    )
    return LimeExplanation(
        target_class=target,
        weighted_words=weighted_words,
        intercept=intercept,
        local_fit_r2=r2,
        predicted_probability=float(probs[0, target]),
    )
