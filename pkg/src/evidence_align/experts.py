"""Faithfulness, helpfulness and conciseness experts.

Each expert is reached through a small backend object so that the built-in
deterministic proxies can be swapped for model-backed scoring services
(see :mod:`evidence_align.remote`) without touching the pipeline.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Protocol

from .records import QuadQARE

_WORD = re.compile(r"\w+", re.UNICODE)

HASH_DIM = 2 ** 16
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


class ExpertError(RuntimeError):
    """An expert failed on a specific record."""


def words(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def sigmoid(x: float) -> float:
    # Negative inputs go through the positive branch so that sig(-x) == 1 - sig(x) holds bit-exactly.
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    return 1.0 - sigmoid(-x)


def fnv1a(token: str) -> int:
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


# backend roles -------------------------------------------------------------

class EntailmentBackend(Protocol):
    kind: str
    name: str

    def entailment(self, premise: str, hypothesis: str) -> float: ...


class AnswerLogProbBackend(Protocol):
    kind: str
    name: str

    def logprob(self, query: str, answer: str, evidence: str | None = None) -> float: ...


class EmbeddingBackend(Protocol):
    kind: str
    name: str

    def cosine(self, text_a: str, text_b: str) -> float: ...


@dataclass(frozen=True)
class TokenContainment:
    """Entailment proxy: share of the hypothesis' word multiset found in the premise."""

    kind: str = "entailment"
    name: str = "proxy-containment"

    def entailment(self, premise: str, hypothesis: str) -> float:
        hyp = Counter(words(hypothesis))
        if not hyp:
            return 0.0
        prem = Counter(words(premise))
        return sum((hyp & prem).values()) / sum(hyp.values())


@dataclass(frozen=True)
class UnigramLM:
    """Answer log-probability proxy: add-``alpha`` smoothed unigram model of the context.

    The context is the query, followed by the evidence when one is given.
    Smoothing uses a fixed nominal vocabulary so that the two contexts are
    scored on the same support.
    """

    alpha: float = 1.0
    vocab_size: int = 50_000
    kind: str = "answer-logprob"
    name: str = "proxy-unigram-lm"

    def logprob(self, query: str, answer: str, evidence: str | None = None) -> float:
        context = words(query if evidence is None else query + " " + evidence)
        counts = Counter(context)
        denom = len(context) + self.alpha * self.vocab_size
        return sum(math.log((counts[w] + self.alpha) / denom) for w in words(answer))


@dataclass(frozen=True)
class HashedTF:
    """Embedding proxy: L2-normalised hashed term-frequency vectors.

    Words are hashed with 64-bit FNV-1a into ``dim`` buckets; distinct words
    can collide, which only ever raises the cosine.
    """

    dim: int = HASH_DIM
    kind: str = "embedding"
    name: str = "proxy-hashed-tf"

    def embed(self, text: str) -> dict[int, float]:
        vec: dict[int, float] = {}
        for w in words(text):
            b = fnv1a(w) % self.dim
            vec[b] = vec.get(b, 0.0) + 1.0
        return vec

    def cosine(self, text_a: str, text_b: str) -> float:
        a, b = self.embed(text_a), self.embed(text_b)
        na = sum(v * v for v in a.values())
        nb = sum(v * v for v in b.values())
        if na == 0.0 or nb == 0.0:
            return 0.0
        dot = sum(a[k] * b[k] for k in sorted(a.keys() & b.keys()))
        return max(-1.0, min(1.0, dot / math.sqrt(na * nb)))


@dataclass(frozen=True)
class Backends:
    faithfulness: EntailmentBackend = field(default_factory=TokenContainment)
    helpfulness: AnswerLogProbBackend = field(default_factory=UnigramLM)
    conciseness: EmbeddingBackend = field(default_factory=HashedTF)

    def names(self) -> dict[str, str]:
        return {
            "faithfulness": self.faithfulness.name,
            "helpfulness": self.helpfulness.name,
            "conciseness": self.conciseness.name,
        }


# scores --------------------------------------------------------------------

@dataclass(frozen=True)
class OracleScores:
    s_f: float
    s_h: float
    s_c: float

    def __post_init__(self):
        for name, lo, hi in (("s_f", 0.0, 1.0), ("s_h", 0.0, 1.0), ("s_c", -1.0, 1.0)):
            v = getattr(self, name)
            if not (math.isfinite(v) and lo <= v <= hi):
                raise ValueError(f"{name}={v!r} outside [{lo}, {hi}]")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.s_f, self.s_h, self.s_c)


def score_faithfulness(premise: str, evidence: str, backend: EntailmentBackend | None = None) -> float:
    if not premise.strip():
        raise ValueError("empty premise")
    if not evidence.strip():
        return 0.0
    return (backend or TokenContainment()).entailment(premise, evidence)


def score_helpfulness(query: str, answer: str, evidence: str,
                      backend: AnswerLogProbBackend | None = None) -> float:
    """Sigmoid of the answer log-probability gain from adding the evidence."""
    if not answer.strip():
        raise ValueError("empty answer")
    backend = backend or UnigramLM()
    with_evidence = backend.logprob(query, answer, evidence)
    without = backend.logprob(query, answer, None)
    return sigmoid(with_evidence - without)


def score_conciseness(full_answer: str, evidence: str, backend: EmbeddingBackend | None = None) -> float:
    if not full_answer.strip() or not evidence.strip():
        raise ValueError("empty conciseness input")
    return (backend or HashedTF()).cosine(full_answer, evidence)


def full_answer_template(query: str, answer: str) -> str:
    if not query or not answer:
        raise ValueError("template needs a query and an answer")
    return f'The answer to "{query}" is {answer}.'


def assess(quad: QuadQARE, backends: Backends = Backends()) -> OracleScores:
    answer = quad.gold_answers[0]
    full = quad.full_answer or full_answer_template(quad.query, answer)
    try:
        s_f = score_faithfulness(quad.passage_text, quad.evidence, backends.faithfulness)
        s_h = score_helpfulness(quad.query, answer, quad.evidence, backends.helpfulness)
        if quad.evidence.strip():
            s_c = score_conciseness(full, quad.evidence, backends.conciseness)
        else:
            s_c = -1.0
        return OracleScores(s_f, s_h, s_c)
    except Exception as exc:
        raise ExpertError(
            f"query {quad.query_id!r} candidate {quad.candidate_index}: {exc}") from exc
