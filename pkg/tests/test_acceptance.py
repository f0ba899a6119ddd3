"""Acceptance suite: one PASS/FAIL line per criterion, printed even under capture."""

import json
import math
import random
import shutil
import subprocess
import sys
import time

import pytest

from evidence_align import alignment, dedup, evaluation, synthetic, weighting
from evidence_align.alignment import LITERAL_RATIO, LOG_RATIO, LossConfig, PolicyEval
from evidence_align.experts import OracleScores
from evidence_align.preference import build_pairs, lambda_weight, rank_candidates
from evidence_align.records import QueryRecord


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}  {detail}".rstrip())
        assert ok, f"criterion {number} failed: {detail}"
    return emit


def test_01_lambda_identity(report):
    rng = random.Random(1)
    t0 = time.perf_counter()
    ok = True
    for _ in range(1000):
        s_l, s_w = sorted(rng.uniform(-1, 1) for _ in range(2))
        if s_w == s_l:
            continue
        r_w = rng.randint(1, 20)
        r_l = rng.randint(r_w + 1, 30)
        lam = lambda_weight(s_w, s_l, r_w, r_l)
        ok &= abs(lam - (s_w - s_l) * (1 / r_w - 1 / r_l)) <= 1e-12 and lam > 0
    dt = time.perf_counter() - t0
    report(1, "lambda identity", ok and dt < 1, f"({dt:.3f}s)")


def test_02_lpo_dpo_reduction(report):
    rng = random.Random(2)
    ok = True
    for _ in range(1000):
        ev = PolicyEval(*(rng.uniform(-20, 0) for _ in range(4)))
        cfg = LossConfig(beta=rng.choice([0.1, 0.5, 1.0]), form=rng.choice([LOG_RATIO, LITERAL_RATIO]))
        ok &= alignment.lpo_loss(ev, 1.0, cfg) == alignment.dpo_loss(ev, cfg)
        lam = rng.uniform(0, 2)
        same = PolicyEval(ev.logp_w_theta, ev.logp_l_theta, ev.logp_w_theta, ev.logp_l_theta)
        ok &= abs(alignment.lpo_loss(same, lam, cfg) - lam * math.log(2)) <= 1e-12
    report(2, "LPO reduces to DPO", ok)


def test_03_gradient_check(report):
    t0 = time.perf_counter()
    worst = alignment.gradcheck(trials=1000, seed=0, h=1e-5)
    dt = time.perf_counter() - t0
    ok = all(err < 1e-6 for err in worst.values()) and dt < 5
    detail = " ".join(f"{k}={v:.1e}" for k, v in worst.items())
    report(3, "analytic gradient vs central differences", ok, f"({detail}; {dt:.2f}s)")


def test_04_cov_weighting(report):
    rng = random.Random(4)
    ok_sum = all(abs(sum(weighting.smooth_weights(*(rng.uniform(0, 5) for _ in range(3)),
                                                  rng.choice(weighting.TAU_GRID)).as_tuple()) - 1) <= 1e-12
                 for _ in range(1000))
    flat = [OracleScores(0.5, 0.5, 0.5)] * 4
    w0, _ = weighting.weight_group(flat, 1.0)
    ok_flat = w0.as_tuple() == (1 / 3, 1 / 3, 1 / 3)
    got = weighting.smooth_weights(0.2, 0.1, 0.1, 1.0).as_tuple()
    want = (0.355873, 0.322064, 0.322064)
    ok_hand = all(abs(g - w) <= 1e-6 for g, w in zip(got, want))
    triples = [OracleScores(rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(-1, 1)) for _ in range(8)]
    _, scored = weighting.weight_group(triples, 1.0, uniform=True)
    ok_uniform = all(c.s == (t.s_f + t.s_h + t.s_c) / 3 for c, t in zip(scored, triples))
    detail = (f"sum={ok_sum} zero-var={ok_flat} uniform={ok_uniform} "
              f"hand-case got ({got[0]:.6f}, {got[1]:.6f}, {got[2]:.6f}) want {want}")
    report(4, "CoV weighting", ok_sum and ok_flat and ok_hand and ok_uniform, detail)


def test_05_dedup(report):
    rng = random.Random(5)
    vocab = "alpha beta gamma delta eps zeta eta theta".split()
    cfg = dedup.DedupConfig()
    ok_idem = ok_sep = True
    for _ in range(500):
        base = [" ".join(rng.choices(vocab, k=rng.randint(1, 8))) for _ in range(rng.randint(1, 6))]
        samples = [rng.choice(base) if rng.random() < 0.4 else s for s in base * 2]
        once = dedup.dedup(samples, cfg).candidates
        ok_idem &= dedup.dedup(once, cfg).candidates == once
        ok_sep &= all(dedup.ngram_similarity(a, b, cfg) < cfg.threshold
                      for i, a in enumerate(once) for b in once[i + 1:])
    ok_collapse = len(dedup.dedup(["the same evidence"] * 10, cfg).candidates) == 1
    report(5, "dedup", ok_idem and ok_sep and ok_collapse,
           f"idempotent={ok_idem} separated={ok_sep} collapse={ok_collapse}")


def _pairs(scores, qid="q"):
    scored = [weighting.ScoredCandidate(i, OracleScores(0, 0.5, 0), s) for i, s in enumerate(scores)]
    return build_pairs(rank_candidates(scored, qid), scored, [f"e{i}" for i in range(len(scores))], "ctx")


def test_06_pair_construction(report, tmp_path):
    ok_count = all(len(_pairs([0.1 * i for i in range(n)])) == n * (n - 1) // 2 for n in range(1, 11))
    ok_ties = len(_pairs([0.4] * 6)) == 0
    blobs = []
    for name in ("a", "b"):
        path = tmp_path / f"{name}.jsonl"
        path.write_text("".join(json.dumps(p.to_dict()) + "\n" for p in synthetic.toy_pairs(seed=6)))
        blobs.append(path.read_bytes())
    report(6, "pair construction", ok_count and ok_ties and blobs[0] == blobs[1],
           f"counts={ok_count} ties={ok_ties} identical={blobs[0] == blobs[1]}")


def test_07_toy_alignment(report):
    t0 = time.perf_counter()
    pairs = synthetic.toy_pairs(n_contexts=100, n_candidates=6, seed=0)
    lpo_cfg, dpo_cfg = LossConfig(beta=0.1), LossConfig(beta=0.1, lambda_mode="unit")
    _, lpo = alignment.train_toy(pairs, epochs=200, lr=0.5, cfg=lpo_cfg)
    _, dpo = alignment.train_toy(pairs, epochs=200, lr=0.5, cfg=dpo_cfg)
    ok_a = all(b < a for a, b in zip(lpo.losses[:50], lpo.losses[1:51]))
    ok_b = lpo.top1 >= 0.9
    ok_c1 = lpo.mrr >= dpo.mrr - 0.01
    skew = synthetic.rank_skewed_pairs(n_contexts=100, n_candidates=6, seed=0)
    _, lpo_s = alignment.train_toy(skew, epochs=200, lr=0.5, cfg=lpo_cfg, pairs_per_context=5)
    _, dpo_s = alignment.train_toy(skew, epochs=200, lr=0.5, cfg=dpo_cfg, pairs_per_context=5)
    ok_c2 = lpo_s.mrr > dpo_s.mrr
    dt = time.perf_counter() - t0
    detail = (f"(a)={ok_a} (b) top1={lpo.top1:.2f} (c) mrr lpo={lpo.mrr:.4f} dpo={dpo.mrr:.4f}; "
              f"skewed lpo={lpo_s.mrr:.4f} dpo={dpo_s.mrr:.4f} ({dt:.2f}s)")
    report(7, "toy alignment", ok_a and ok_b and ok_c1 and ok_c2 and dt < 10, detail)


# (response, golds, em, f1), each worked out by hand
MICRO_CORPUS = [
    ("paris is the capital", ["Paris"], 1, 0.4),
    ("london", ["Paris"], 0, 0.0),
    ("Paris", ["Paris"], 1, 1.0),
    ("cat sat", ["the cat sat"], 0, 0.8),
    ("The Cat, sat.", ["the cat sat"], 1, 1.0),
    ("", ["x"], 0, 0.0),
    ("new york city", ["New York"], 1, 0.8),
    ("york new", ["new york"], 0, 1.0),
    ("it was 1999", ["1999", "nineteen ninety-nine"], 1, 0.5),
    ("parish", ["paris"], 0, 0.0),
    ("the the the", ["the"], 1, 0.5),
    ("a b c d", ["b c", "d e"], 1, 2 / 3),
    ("U.S.A. wins", ["usa"], 1, 2 / 3),
    ("Mount Everest!", ["mount everest"], 1, 1.0),
    ("everest mount", ["Mount Everest"], 0, 1.0),
    ("the answer is 42", ["forty two", "42"], 1, 0.4),
    ("blue green", ["green blue red"], 0, 0.8),
    ("red red blue", ["red blue blue"], 0, 2 / 3),
    ("Dr. Who", ["dr who"], 1, 1.0),
    ("  spaced   out  ", ["spaced out"], 1, 1.0),
]


def test_08_metrics(report):
    bad = [i for i, (resp, golds, em, f1) in enumerate(MICRO_CORPUS, 1)
           if evaluation.exact_match(resp, golds) != em or evaluation.unigram_f1(resp, golds) != f1]
    golds = ["one", "one two three four five", "one two three four five six", "a, b; c. d! e? f",
             "U.S. Route 66"]
    rec = QueryRecord("q", "q?", golds, ["p"])
    (kept,) = evaluation.filter_long_answers([rec], 5)
    want = tuple(g for g in golds if len(evaluation.normalize(g)) <= 5)
    ok_filter = kept.gold_answers == want == ("one", "one two three four five", "U.S. Route 66")
    report(8, "EM / F1 micro-corpus and answer filter", not bad and ok_filter,
           f"mismatched cases={bad} filter={ok_filter}")


def test_09_robustness(report):
    rec = QueryRecord("q9", "q?", ["a"], [f"relevant passage {w}" for w in "abcde"])
    pool = [f"noise text {i}" for i in range(30)]
    mixes = [evaluation.mix_noise(rec, pool, nsr, 13) for nsr in evaluation.NSR_GRID]
    counts = [len(m.distractors) for m in mixes]
    ok_counts = counts == [0, 5, 10, 15, 20]
    silver = {evaluation.silver_faithfulness(m, "relevant passage c noise text") for m in mixes}
    ok_silver = len(silver) == 1
    drops = [(40.0, 30.0, 25.0), (0.5, 0.45, 10.0), (62.5, 50.0, 20.0), (10.0, 12.0, -20.0)]
    ok_drop = all(abs(evaluation.drop_percent(b, n) - want) <= 1e-12 for b, n, want in drops)
    report(9, "robustness harness", ok_counts and ok_silver and ok_drop,
           f"counts={counts} silver={sorted(silver)} drop={ok_drop}")


def test_10_end_to_end(report, tmp_path):
    t0 = time.perf_counter()
    outputs, codes = [], []
    for name in ("first", "second"):
        d = tmp_path / name
        cmd = [sys.executable, "-m", "evidence_align"]
        codes.append(subprocess.run(cmd + ["make-demo", "--out", str(d)], capture_output=True).returncode)
        codes.append(subprocess.run(cmd + ["run", "--config", str(d / "config.yaml")],
                                    capture_output=True).returncode)
        manifest = json.loads((d / "run" / "manifest.json").read_text())
        files = sorted(p.name for p in (d / "run").iterdir() if p.name != "manifest.json")
        outputs.append({f: (d / "run" / f).read_bytes() for f in files})
        outputs[-1]["stages"] = sorted(manifest["stages"]).__repr__().encode()
    dt = time.perf_counter() - t0
    stages_ok = outputs[0]["stages"] == repr(sorted(["dedup", "assess", "weight", "pairs", "train-toy",
                                                     "eval"])).encode()
    ok = codes == [0] * 4 and outputs[0] == outputs[1] and stages_ok and dt < 30
    report(10, "end-to-end demo", ok, f"exit codes={codes} identical={outputs[0] == outputs[1]} ({dt:.2f}s)")
