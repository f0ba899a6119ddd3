"""Near-duplicate removal over sampled evidence candidates.

Sampling an extractor M times tends to return a few popular outputs many
times over. A greedy pass with word n-gram Dice similarity keeps the first
occurrence of each near-duplicate group so that later scoring sees a roughly
uniform candidate set.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .records import CandidateSet


@dataclass(frozen=True)
class DedupConfig:
    n: int = 2
    threshold: float = 0.8
    tokenize: bool = True  # word-level tokens; False means character n-grams

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n-gram order must be >= 1, got {self.n}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"threshold must lie in (0, 1], got {self.threshold}")


def ngrams(text: str, cfg: DedupConfig) -> Counter:
    """Multiset of n-grams. Texts shorter than ``n`` units fall back to unigrams."""
    units = text.lower().split() if cfg.tokenize else list(text.lower())
    n = cfg.n if len(units) >= cfg.n else 1
    return Counter(tuple(units[i:i + n]) for i in range(len(units) - n + 1))


def dice(a: Counter, b: Counter) -> float:
    total = sum(a.values()) + sum(b.values())
    if total == 0:
        return 1.0
    overlap = sum((a & b).values())
    return 2.0 * overlap / total


def ngram_similarity(a: str, b: str, cfg: DedupConfig = DedupConfig()) -> float:
    """Dice coefficient of the two texts' n-gram multisets.

    Two empty texts are identical (1.0); one empty text shares nothing (0.0).
    """
    return dice(ngrams(a, cfg), ngrams(b, cfg))


def dedup(samples: Sequence[str], cfg: DedupConfig = DedupConfig(), query_id: str = "") -> CandidateSet:
    if not samples:
        raise ValueError("no samples")
    kept: list[str] = []
    kept_grams: list[Counter] = []
    for text in samples:
        grams = ngrams(text, cfg)
        if all(dice(grams, other) < cfg.threshold for other in kept_grams):
            kept.append(text)
            kept_grams.append(grams)
    return CandidateSet(query_id=query_id, candidates=tuple(kept), deduped=True)


def passthrough(samples: Sequence[str], query_id: str = "") -> CandidateSet:
    """No-dedup ablation: every sample becomes a candidate."""
    if not samples:
        raise ValueError("no samples")
    return CandidateSet(query_id=query_id, candidates=tuple(samples), deduped=False)
