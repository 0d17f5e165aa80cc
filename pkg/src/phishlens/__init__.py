"""phishlens: phishing-email detection and explanation toolkit.

A from-scratch transformer text classifier (numpy forward/backward, AdamW
fine-tuning) over a WordPiece tokenizer, with confusion-matrix metrics and
two independent per-prediction explainers: a word-removal local surrogate
(LIME) and integrated gradients on the embedding path.
"""

__version__ = "0.1.0"
