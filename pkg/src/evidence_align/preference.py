"""Candidate ranking, reciprocal-rank lambda weights and preference pairs."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

from .weighting import ScoredCandidate


@dataclass(frozen=True)
class Ranking:
    query_id: str
    order: tuple[int, ...]
    rank: dict[int, int]


@dataclass(frozen=True)
class PreferencePair:
    query_id: str
    context: str
    winner: str
    loser: str
    winner_index: int
    loser_index: int
    s_w: float
    s_l: float
    r_w: int
    r_l: int
    delta_mrr: float
    weight: float  # the lambda weight

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("weight")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PreferencePair":
        d = dict(d)
        d["weight"] = d.pop("lambda")
        known = set(cls.__dataclass_fields__)
        return cls(**{k: v for k, v in d.items() if k in known})


def rank_candidates(scored: Sequence[ScoredCandidate], query_id: str = "") -> Ranking:
    """Descending by combined score, ties broken by ascending candidate index."""
    if not scored:
        raise ValueError("cannot rank an empty candidate list")
    ordered = sorted(scored, key=lambda c: (-c.s, c.candidate_index))
    order = tuple(c.candidate_index for c in ordered)
    return Ranking(query_id, order, {idx: pos for pos, idx in enumerate(order, start=1)})


def delta_mrr(r_w: int, r_l: int) -> float:
    if r_w < 1 or r_l < 1:
        raise ValueError(f"ranks start at 1, got ({r_w}, {r_l})")
    return 1.0 / r_w - 1.0 / r_l


def lambda_weight(s_w: float, s_l: float, r_w: int, r_l: int) -> float:
    """Reciprocal-rank gain of the pair, weighted by the two scores.

    Equal to ``(s_w - s_l) * (1/r_w - 1/r_l)``, so strictly positive whenever
    the winner outscores and outranks the loser.
    """
    if not s_w > s_l:
        raise ValueError(f"winner score {s_w} must exceed loser score {s_l}")
    if not r_w < r_l:
        raise ValueError(f"winner rank {r_w} must precede loser rank {r_l}")
    # factored form: the expanded sum can round to zero for near-equal scores
    return (s_w - s_l) * delta_mrr(r_w, r_l)


def build_pairs(ranking: Ranking, scored: Sequence[ScoredCandidate], texts: Sequence[str],
                context: str, use_lambda: bool = True) -> list[PreferencePair]:
    """All strictly-ordered pairs of a query, sorted by (winner rank, loser rank).

    ``use_lambda=False`` is the unweighted ablation and sets every weight to 1.
    """
    by_index = {c.candidate_index: c for c in scored}
    ordered = [by_index[i] for i in ranking.order]
    pairs = []
    for a, w in enumerate(ordered):
        for l in ordered[a + 1:]:
            if not w.s > l.s:
                continue
            r_w, r_l = ranking.rank[w.candidate_index], ranking.rank[l.candidate_index]
            pairs.append(PreferencePair(
                query_id=ranking.query_id,
                context=context,
                winner=texts[w.candidate_index],
                loser=texts[l.candidate_index],
                winner_index=w.candidate_index,
                loser_index=l.candidate_index,
                s_w=w.s,
                s_l=l.s,
                r_w=r_w,
                r_l=r_l,
                delta_mrr=delta_mrr(r_w, r_l),
                weight=lambda_weight(w.s, l.s, r_w, r_l) if use_lambda else 1.0,
            ))
    return pairs
