"""File-to-file pipeline stages shared by the CLI and the orchestrator.

Intermediate files are JSON lines, one query per line:

* ``scored``: ``{query_id, context, backends, candidates: [{candidate_index,
  evidence, s_f, s_h, s_c}]}``
* ``ranked``: the scored line plus ``weights``, ``stats``, ``order`` and, per
  candidate, the combined score ``s`` and ``rank``.
* ``pairs``: one preference pair per line.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Iterable

from . import alignment, dedup as dd, evaluation, experts, weighting
from .preference import PreferencePair, Ranking, build_pairs, rank_candidates
from .records import (CandidateSet, GeneratorResponse, QuadQARE, RecordError, load, load_records,
                      read_jsonl, save, write_jsonl)

log = logging.getLogger(__name__)


class StageError(RuntimeError):
    """A stage failed; ``record_id`` names the offending record when known."""

    def __init__(self, message: str, record_id: str | None = None):
        super().__init__(message)
        self.record_id = record_id


def _rows(path) -> list[dict]:
    return [obj for _, obj in read_jsonl(path)]


def _pmap(fn, items: list, workers: int) -> list:
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _json_float(x: float):
    return x if x == x and abs(x) != float("inf") else None


# dedup ---------------------------------------------------------------------

def run_dedup(in_path, out_path, cfg: dd.DedupConfig = dd.DedupConfig(), no_dedup: bool = False,
              expected_samples: int | None = None) -> list[CandidateSet]:
    out = []
    for lineno, obj in read_jsonl(in_path):
        texts = obj.get("candidates", obj.get("samples"))
        qid = obj.get("query_id")
        if qid is None or texts is None:
            raise RecordError(f"{in_path}: line {lineno}: need query_id and candidates/samples")
        if expected_samples is not None and len(texts) != expected_samples:
            log.warning("query %s has %d samples, expected %d", qid, len(texts), expected_samples)
        try:
            cs = dd.passthrough(texts, qid) if no_dedup else dd.dedup(texts, cfg, qid)
        except ValueError as exc:
            raise StageError(f"dedup failed for {qid!r}: {exc}", qid) from exc
        out.append(cs)
    save(out, out_path)
    return out


# assess --------------------------------------------------------------------

def quads_for(record, cset: CandidateSet) -> list[QuadQARE]:
    return [QuadQARE(query_id=record.id, candidate_index=i, query=record.query,
                     gold_answers=record.gold_answers, passages=record.relevant_passages,
                     evidence=e, full_answer=record.full_answer)
            for i, e in enumerate(cset.candidates)]


def run_assess(records_path, candidates_path, out_path, backends: experts.Backends = experts.Backends(),
               workers: int = 1) -> list[dict]:
    records = {r.id: r for r in load_records(records_path)}
    csets = load(candidates_path, CandidateSet)
    jobs = []
    for cs in csets:
        if cs.query_id not in records:
            raise StageError(f"candidates reference unknown query {cs.query_id!r}", cs.query_id)
        jobs.extend(quads_for(records[cs.query_id], cs))

    def score(quad: QuadQARE):
        try:
            return experts.assess(quad, backends)
        except experts.ExpertError as exc:
            raise StageError(str(exc), quad.query_id) from exc

    scores = iter(_pmap(score, jobs, workers))
    rows = []
    for cs in csets:
        rec = records[cs.query_id]
        cands = []
        for i, text in enumerate(cs.candidates):
            sc = next(scores)
            cands.append({"candidate_index": i, "evidence": text,
                          "s_f": sc.s_f, "s_h": sc.s_h, "s_c": sc.s_c})
        rows.append({"query_id": cs.query_id, "context": rec.context,
                     "backends": backends.names(), "candidates": cands})
    write_jsonl(out_path, rows)
    return rows


# weight --------------------------------------------------------------------

def _oracles(row: dict) -> list[experts.OracleScores]:
    return [experts.OracleScores(c["s_f"], c["s_h"], c["s_c"]) for c in row["candidates"]]


def _stats_dict(stats) -> dict:
    return {name: {"mu": s.mu, "sigma": s.sigma, "cov": s.cov}
            for name, s in zip(("faithfulness", "helpfulness", "conciseness"), stats)}


def run_weight(in_path, out_path, tau: float = weighting.DEFAULT_TAU, uniform: bool = False,
               dataset_level: bool = False) -> list[dict]:
    rows = _rows(in_path)
    fixed = None
    pooled_stats = None
    if dataset_level and not uniform:
        pooled = [o for row in rows for o in _oracles(row)]
        pooled_stats = weighting.group_stats(pooled)
        fixed = weighting.smooth_weights(*(s.cov for s in pooled_stats), tau)
    out = []
    for row in rows:
        oracles = _oracles(row)
        if not oracles:
            raise StageError(f"query {row['query_id']!r} has no candidates", row["query_id"])
        weights, scored = weighting.weight_group(oracles, tau, weights=fixed, uniform=uniform)
        stats = pooled_stats or weighting.group_stats(oracles)
        ranking = rank_candidates(scored, row["query_id"])
        cands = [dict(c, s=sc.s, rank=ranking.rank[sc.candidate_index])
                 for c, sc in zip(row["candidates"], scored)]
        out.append(dict(
            row,
            candidates=cands,
            order=list(ranking.order),
            weights={"alpha_f": weights.alpha_f, "alpha_h": weights.alpha_h,
                     "alpha_c": weights.alpha_c, "tau": _json_float(weights.tau),
                     "mode": "uniform" if uniform else ("dataset" if dataset_level else "query")},
            stats=_stats_dict(stats),
        ))
    write_jsonl(out_path, out)
    return out


# pairs ---------------------------------------------------------------------

def pairs_for_row(row: dict, use_lambda: bool = True) -> list[PreferencePair]:
    scored = [weighting.ScoredCandidate(c["candidate_index"],
                                        experts.OracleScores(c["s_f"], c["s_h"], c["s_c"]), c["s"])
              for c in row["candidates"]]
    ranking = Ranking(row["query_id"], tuple(row["order"]),
                      {c["candidate_index"]: c["rank"] for c in row["candidates"]})
    texts = {c["candidate_index"]: c["evidence"] for c in row["candidates"]}
    return build_pairs(ranking, scored, texts, row["context"], use_lambda)


def run_pairs(in_path, out_path, use_lambda: bool = True) -> list[PreferencePair]:
    pairs = [p for row in _rows(in_path) for p in pairs_for_row(row, use_lambda)]
    write_jsonl(out_path, (p.to_dict() for p in pairs))
    return pairs


# train / export ------------------------------------------------------------

def run_train(pairs_path, report_path, epochs: int = 200, lr: float = 0.5,
              cfg: alignment.LossConfig = alignment.LossConfig(), seed: int = 7,
              pairs_per_context: int | None = None) -> dict:
    pairs = [PreferencePair.from_dict(obj) for _, obj in read_jsonl(pairs_path)]
    _, report = alignment.train_toy(pairs, epochs, lr, cfg, seed, pairs_per_context)
    out = {"epochs": epochs, "lr": lr, "beta": cfg.beta, "form": cfg.form,
           "lambda_mode": cfg.lambda_mode, "seed": seed,
           "pairs_per_context": pairs_per_context, **report.to_dict()}
    Path(report_path).write_text(json.dumps(out, indent=2) + "\n", encoding="utf-8")
    return out


def run_export_ppo(in_path, out_path) -> list[dict]:
    out = []
    for row in _rows(in_path):
        out.extend(alignment.export_ppo_rewards(
            row["query_id"], row["context"],
            [c["evidence"] for c in row["candidates"]], [c["s"] for c in row["candidates"]]))
    write_jsonl(out_path, out)
    return out


# eval / perturb ------------------------------------------------------------

def run_eval(responses_path, records_path, out_path, max_answer_tokens: int | None = None) -> dict:
    records = load_records(records_path)
    if max_answer_tokens is not None:
        records = evaluation.filter_long_answers(records, max_answer_tokens)
    by_id = {r.id: r for r in records}
    results = []
    for resp in load(responses_path, GeneratorResponse):
        rec = by_id.get(resp.query_id)
        if rec is None:
            continue  # filtered out or unknown
        results.append(evaluation.evaluate(resp, rec))
    write_jsonl(out_path, (r.to_dict() for r in results))
    n = len(results)
    return {
        "n": n,
        "em": sum(r.em for r in results) / n if n else 0.0,
        "f1": sum(r.f1 for r in results) / n if n else 0.0,
        "tok": sum(r.tok for r in results) / n if n else 0.0,
        "normalization": evaluation.NORMALIZATION,
    }


def load_pool(path) -> list[str]:
    pool = []
    for _, obj in read_jsonl(path):
        pool.append(obj if isinstance(obj, str) else obj["text"])
    return pool


def run_perturb(records_path, pool_path, out_path, nsr: int, seed: int) -> list[evaluation.NoiseMix]:
    pool = load_pool(pool_path)
    mixes = [evaluation.mix_noise(r, pool, nsr, seed) for r in load_records(records_path)]
    write_jsonl(out_path, (m.to_dict() for m in mixes))
    return mixes


def iter_pairs(path) -> Iterable[PreferencePair]:
    return (PreferencePair.from_dict(obj) for _, obj in read_jsonl(path))
