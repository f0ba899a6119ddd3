"""HTTP client for model-backed expert services.

Wire format: the client POSTs one JSON object carrying ``kind`` plus the
fields that kind needs, and expects ``{"score": <number>}`` back.

=================  ==============================  ===============
kind               request fields                  score range
=================  ==============================  ===============
entailment         premise, hypothesis             [0, 1]
answer-logprob     query, answer, evidence (opt.)  (-inf, 0]
embedding          text_a, text_b                  [-1, 1]
=================  ==============================  ===============
"""

from __future__ import annotations

import json
import logging
import math
import os
import time
import urllib.error
import urllib.request
from dataclasses import dataclass

log = logging.getLogger(__name__)

ENDPOINT_ENV = "EVIDENCE_ALIGN_SCORER_URL"

SCORE_RANGES = {
    "entailment": (0.0, 1.0),
    "answer-logprob": (-math.inf, 0.0),
    "embedding": (-1.0, 1.0),
}


class BackendError(RuntimeError):
    """The scoring service could not be reached or failed."""


class ProtocolError(BackendError):
    """The scoring service replied with something outside the wire contract."""


def remote_score(endpoint: str, payload: dict, *, retries: int = 3, backoff: float = 0.2,
                 timeout: float = 10.0) -> float:
    kind = payload.get("kind")
    if kind not in SCORE_RANGES:
        raise ProtocolError(f"unknown scoring kind {kind!r}")
    body = json.dumps(payload).encode("utf-8")
    last: Exception | None = None
    for attempt in range(retries + 1):
        if attempt:
            time.sleep(backoff * 2 ** (attempt - 1))
        req = urllib.request.Request(endpoint, data=body, method="POST",
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                raw = resp.read()
            break
        except urllib.error.HTTPError as exc:
            if exc.code < 500:
                raise BackendError(f"{endpoint}: HTTP {exc.code}") from exc
            last = exc
        except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
            last = exc
        log.warning("scorer %s attempt %d failed: %s", endpoint, attempt + 1, last)
    else:
        raise BackendError(f"{endpoint}: gave up after {retries + 1} attempts: {last}")

    try:
        score = json.loads(raw)["score"]
    except (ValueError, KeyError, TypeError) as exc:
        raise ProtocolError(f"{endpoint}: reply lacks a numeric 'score' field") from exc
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise ProtocolError(f"{endpoint}: score is not a number: {score!r}")
    lo, hi = SCORE_RANGES[kind]
    if not (math.isfinite(score) and lo <= score <= hi):
        raise ProtocolError(f"{endpoint}: {kind} score {score} outside [{lo}, {hi}]")
    return float(score)


@dataclass(frozen=True)
class _Remote:
    url: str
    retries: int = 3
    backoff: float = 0.2
    timeout: float = 10.0

    @property
    def name(self) -> str:
        return f"remote:{self.url}"

    def _call(self, payload: dict) -> float:
        return remote_score(self.url, payload, retries=self.retries,
                            backoff=self.backoff, timeout=self.timeout)


@dataclass(frozen=True)
class RemoteEntailment(_Remote):
    kind: str = "entailment"

    def entailment(self, premise: str, hypothesis: str) -> float:
        return self._call({"kind": self.kind, "premise": premise, "hypothesis": hypothesis})


@dataclass(frozen=True)
class RemoteAnswerLogProb(_Remote):
    kind: str = "answer-logprob"

    def logprob(self, query: str, answer: str, evidence: str | None = None) -> float:
        payload = {"kind": self.kind, "query": query, "answer": answer}
        if evidence is not None:
            payload["evidence"] = evidence
        return self._call(payload)


@dataclass(frozen=True)
class RemoteEmbedding(_Remote):
    kind: str = "embedding"

    def cosine(self, text_a: str, text_b: str) -> float:
        return self._call({"kind": self.kind, "text_a": text_a, "text_b": text_b})


def resolve_url(url: str | None) -> str:
    """Environment override wins over the configured URL."""
    env = os.environ.get(ENDPOINT_ENV)
    if env:
        return env
    if not url:
        raise BackendError(f"remote backend needs a URL (config or ${ENDPOINT_ENV})")
    return url
