"""Seeded synthetic data: a small demo QA corpus and toy preference datasets."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .experts import OracleScores
from .preference import PreferencePair, build_pairs, rank_candidates
from .records import CandidateSet, GeneratorResponse, QueryRecord, save, write_jsonl
from .weighting import ScoredCandidate, weight_group

_SYLLABLES = ["ar", "bel", "cor", "dun", "el", "fen", "gar", "hol", "is", "jor", "kel", "lun",
              "mar", "nor", "os", "pel", "quen", "ros", "sil", "tor", "ul", "ven", "wyn", "zar"]
_NOUNS = ["harbour", "market", "bridge", "library", "orchard", "tower", "festival", "mill",
          "school", "garden", "museum", "canal", "quarry", "chapel", "theatre"]
_ADJS = ["old", "busy", "quiet", "famous", "narrow", "painted", "ancient", "modern", "wooden"]
_TEMPLATES = [
    ("Who founded {s}?", "{s} was founded by {a} in {y}."),
    ("Which river flows through {s}?", "The river {a} flows through the centre of {s}."),
    ("Who designed the main bridge of {s}?", "The main bridge of {s} was designed by {a} in {y}."),
    ("What is the oldest guild in {s}?", "The oldest guild in {s} is the {a} guild, chartered in {y}."),
]


def _name(rng: np.random.Generator, parts: int = 2) -> str:
    return "".join(rng.choice(_SYLLABLES, size=parts)).capitalize()


def _filler(rng: np.random.Generator, place: str) -> str:
    return (f"The {rng.choice(_ADJS)} {rng.choice(_NOUNS)} of {place} "
            f"is known for its {rng.choice(_ADJS)} {rng.choice(_NOUNS)}.")


def demo_dataset(n_queries: int = 12, m_samples: int = 10, seed: int = 2024):
    """Records, sampled candidates, generator responses and a distractor pool.

    Candidate samples follow a heavy-tailed distribution over a handful of
    evidence styles (answer sentence, sentence plus context, whole passage,
    off-topic sentence), so exact and near duplicates are common.
    """
    rng = np.random.default_rng(seed)
    records, samples, responses = [], [], []
    for i in range(n_queries):
        place, answer = _name(rng, 3), _name(rng, 2)
        year = int(rng.integers(1200, 1900))
        q_tpl, a_tpl = _TEMPLATES[i % len(_TEMPLATES)]
        query = q_tpl.format(s=place)
        fact = a_tpl.format(s=place, a=answer, y=year)
        passages = [" ".join(_filler(rng, place) for _ in range(3)) for _ in range(5)]
        host = int(rng.integers(0, 5))
        host_sents = passages[host].split(". ")
        host_sents.insert(1, fact.rstrip("."))
        passages[host] = ". ".join(host_sents)
        context_sent = _filler(rng, place)
        styles = [
            fact,
            fact.lower(),
            fact + " " + passages[host].split(". ")[0] + ".",
            passages[host],
            _filler(rng, place),
            f"{answer}.",
            context_sent,
            f"According to the passage, {fact[0].lower()}{fact[1:]}",
        ]
        weights = 1.0 / np.arange(1, len(styles) + 1) ** 1.3
        picks = rng.choice(len(styles), size=m_samples, p=weights / weights.sum())
        rid = f"q{i:02d}"
        records.append(QueryRecord(
            id=rid, query=query, gold_answers=(answer, answer.lower()),
            relevant_passages=tuple(passages),
            full_answer=fact if i % 2 == 0 else None,
        ))
        samples.append(CandidateSet(query_id=rid, candidates=tuple(styles[k] for k in picks)))
        output = f"The answer is {answer}." if i % 3 else f"I think it is {_name(rng, 2)}."
        responses.append(GeneratorResponse(query_id=rid, output=output,
                                           token_count=len(output.split()),
                                           extra={"evidence": fact}))
    pool = [_filler(rng, _name(rng, 3)) + " " + _filler(rng, _name(rng, 3)) for _ in range(60)]
    return records, samples, responses, pool


def write_demo(out_dir: str | Path, seed: int = 2024) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records, samples, responses, pool = demo_dataset(seed=seed)
    paths = {name: out / f"{name}.jsonl" for name in ("records", "samples", "responses", "distractors")}
    save(records, paths["records"])
    save(samples, paths["samples"])
    save(responses, paths["responses"])
    write_jsonl(paths["distractors"], ({"text": t} for t in pool))
    return paths


# toy preference data --------------------------------------------------------

def _pairs_from_scores(qid: str, scores: np.ndarray, use_lambda: bool = True) -> list[PreferencePair]:
    scored = [ScoredCandidate(j, OracleScores(0.0, 0.5, 0.0), float(s)) for j, s in enumerate(scores)]
    ranking = rank_candidates(scored, qid)
    texts = [f"{qid}-cand{j}" for j in range(len(scores))]
    return build_pairs(ranking, scored, texts, context=f"context {qid}", use_lambda=use_lambda)


def toy_pairs(n_contexts: int = 100, n_candidates: int = 6, seed: int = 0, tau: float = 1.0,
              use_lambda: bool = True) -> list[PreferencePair]:
    """Pairs from random expert score triples combined by CoV-weighting per context."""
    rng = np.random.default_rng(seed)
    pairs = []
    for k in range(n_contexts):
        triples = [OracleScores(float(rng.uniform(0, 1)), float(rng.uniform(0.05, 0.95)),
                                float(rng.uniform(-0.2, 1))) for _ in range(n_candidates)]
        _, scored = weight_group(triples, tau)
        pairs.extend(_pairs_from_scores(f"ctx{k:03d}", np.array([c.s for c in scored]), use_lambda))
    return pairs


def rank_skewed_pairs(n_contexts: int = 100, n_candidates: int = 6, seed: int = 0,
                      use_lambda: bool = True) -> list[PreferencePair]:
    """Pairs whose score gaps sit between the top-ranked candidates.

    The best candidates are separated by wide gaps while the tail is nearly
    tied, so getting the top of each list right matters most for MRR.
    """
    rng = np.random.default_rng(seed)
    base = np.array([0.4, 0.2] + [0.01] * (n_candidates - 3))
    pairs = []
    for k in range(n_contexts):
        gaps = base * rng.uniform(0.5, 1.5, size=len(base))
        ordered = 0.95 - np.concatenate([[0.0], np.cumsum(gaps)])
        scores = np.empty(n_candidates)
        scores[rng.permutation(n_candidates)] = ordered
        pairs.extend(_pairs_from_scores(f"ctx{k:03d}", scores, use_lambda))
    return pairs
