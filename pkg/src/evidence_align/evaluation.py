"""QA metrics (containment EM, unigram F1, token length) and the noise-injection harness."""

from __future__ import annotations

import hashlib
import math
import unicodedata
from collections import Counter
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .experts import EntailmentBackend, score_faithfulness
from .records import PASSAGE_DELIMITER, ConfigError, GeneratorResponse, QueryRecord

NORMALIZATION = "lower+strip-punct+split-ws"
NSR_GRID = (0, 100, 200, 300, 400)


def normalize(text: str) -> list[str]:
    """Lowercase, drop punctuation characters, split on whitespace."""
    kept = "".join(ch for ch in text.lower() if not unicodedata.category(ch).startswith("P"))
    return kept.split()


def _contains(haystack: Sequence[str], needle: Sequence[str]) -> bool:
    n = len(needle)
    if n == 0:
        return False
    return any(list(haystack[i:i + n]) == list(needle) for i in range(len(haystack) - n + 1))


def exact_match(response: str, golds: Sequence[str]) -> int:
    """1 iff some gold's token sequence occurs contiguously in the response."""
    if not golds:
        raise ValueError("exact_match needs at least one gold answer")
    tokens = normalize(response)
    return int(any(_contains(tokens, normalize(g)) for g in golds))


def _f1(pred: list[str], gold: list[str]) -> float:
    if not pred and not gold:
        return 1.0
    if not pred or not gold:
        return 0.0
    overlap = sum((Counter(pred) & Counter(gold)).values())
    if overlap == 0:
        return 0.0
    p, r = overlap / len(pred), overlap / len(gold)
    return 2 * p * r / (p + r)


def unigram_f1(response: str, golds: Sequence[str]) -> float:
    if not golds:
        raise ValueError("unigram_f1 needs at least one gold answer")
    pred = normalize(response)
    return max(_f1(pred, normalize(g)) for g in golds)


COUNTERS: dict[str, Callable[[str], int]] = {
    "whitespace": lambda text: len(text.split()),
    "normalized": lambda text: len(normalize(text)),
    "characters": len,
}


def token_count(text: str, counter: str = "whitespace") -> int:
    try:
        fn = COUNTERS[counter]
    except KeyError:
        raise ConfigError(f"unknown token counter {counter!r}; known: {sorted(COUNTERS)}") from None
    return fn(text)


def filter_long_answers(records: Sequence[QueryRecord], max_tokens: int = 5) -> list[QueryRecord]:
    """Drop golds longer than ``max_tokens`` normalized tokens; drop records left without golds."""
    out = []
    for r in records:
        golds = tuple(g for g in r.gold_answers if len(normalize(g)) <= max_tokens)
        if golds:
            out.append(replace(r, gold_answers=golds))
    return out


@dataclass(frozen=True)
class EvalResult:
    query_id: str
    em: int
    f1: float
    tok: int
    counter_name: str

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "em": self.em, "f1": self.f1, "tok": self.tok,
                "counter_name": self.counter_name, "normalization": NORMALIZATION}


def evaluate(response: GeneratorResponse, record: QueryRecord) -> EvalResult:
    """Score one generator response.

    ``tok`` counts the evidence the generator was given when the response
    carries an ``evidence`` field, and the response text otherwise.
    """
    counted = token_count(response.output, response.counter_name)
    if counted != response.token_count:
        raise ValueError(f"response {response.query_id!r}: token_count {response.token_count} "
                         f"disagrees with {response.counter_name!r} counter ({counted})")
    evidence = response.extra.get("evidence")
    tok = token_count(evidence, response.counter_name) if isinstance(evidence, str) else counted
    return EvalResult(response.query_id, exact_match(response.output, record.gold_answers),
                      unigram_f1(response.output, record.gold_answers), tok, response.counter_name)


# noise robustness --------------------------------------------------------------

@dataclass(frozen=True)
class NoiseMix:
    """Relevant passages shuffled together with injected distractors.

    Each passage is ``(text, is_relevant, source_index)``; ``source_index``
    points into the record's relevant passages or into the distractor pool.
    """

    query_id: str
    nsr_percent: int
    passages: tuple[tuple[str, bool, int], ...]
    seed: int

    @property
    def relevant(self) -> list[str]:
        """Relevant passages in their original record order."""
        return [t for t, _, _ in sorted((p for p in self.passages if p[1]), key=lambda p: p[2])]

    @property
    def distractors(self) -> list[str]:
        return [t for t, rel, _ in self.passages if not rel]

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "nsr_percent": self.nsr_percent, "seed": self.seed,
                "passages": [{"text": t, "relevant": rel, "source_index": i}
                             for t, rel, i in self.passages]}

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseMix":
        return cls(d["query_id"], int(d["nsr_percent"]),
                   tuple((p["text"], bool(p["relevant"]), int(p["source_index"])) for p in d["passages"]),
                   int(d["seed"]))


def record_seed(seed: int, query_id: str) -> int:
    """Per-record generator seed, independent of processing order."""
    digest = hashlib.sha256(query_id.encode("utf-8")).digest()
    return seed ^ int.from_bytes(digest[:8], "little")


def distractor_count(nsr_percent: int, n_relevant: int) -> int:
    # round half up
    return math.floor(nsr_percent * n_relevant / 100 + 0.5)


def mix_noise(record: QueryRecord, pool: Sequence[str], nsr_percent: int, seed: int) -> NoiseMix:
    if nsr_percent < 0:
        raise ValueError("nsr_percent must be non-negative")
    relevant = list(record.relevant_passages)
    need = distractor_count(nsr_percent, len(relevant))
    if need > len(pool):
        raise ValueError(f"distractor pool too small for {record.id!r}: "
                         f"need {need}, have {len(pool)}")
    rng = np.random.default_rng(record_seed(seed, record.id))
    picked = rng.choice(len(pool), size=need, replace=False) if need else []
    tagged = [(p, True, i) for i, p in enumerate(relevant)] + [(pool[i], False, int(i)) for i in picked]
    order = rng.permutation(len(tagged))
    return NoiseMix(record.id, nsr_percent, tuple(tagged[i] for i in order), seed)


def silver_faithfulness(mix: NoiseMix, evidence: str, backend: EntailmentBackend | None = None) -> float:
    """Faithfulness against the relevant passages only; injected distractors are ignored."""
    return score_faithfulness(PASSAGE_DELIMITER.join(mix.relevant), evidence, backend)


def drop_percent(base: float, noisy: float) -> float:
    if base == 0:
        raise ValueError("drop_percent is undefined for a zero baseline")
    return 100.0 * (base - noisy) / base
