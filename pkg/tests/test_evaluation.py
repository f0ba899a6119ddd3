import math

import pytest
from hypothesis import given, strategies as st

from evidence_align.evaluation import (NSR_GRID, NoiseMix, distractor_count, drop_percent, evaluate,
                                       exact_match, filter_long_answers, mix_noise, normalize,
                                       silver_faithfulness, token_count, unigram_f1)
from evidence_align.records import ConfigError, GeneratorResponse, QueryRecord


def _rec(qid="q1", golds=("Paris",), passages=("Paris is the capital of France.",)):
    return QueryRecord(qid, "capital of france?", list(golds), list(passages))


def test_normalize():
    assert normalize("  The Cat, sat.  ") == ["the", "cat", "sat"]
    assert normalize("U.S.A.") == ["usa"]
    assert normalize("«quoted» — dash") == ["quoted", "dash"]
    assert normalize("") == []


def test_em_is_token_containment():
    assert exact_match("I think paris is right", ["Paris"]) == 1
    assert exact_match("par is", ["paris"]) == 0
    assert exact_match("parish council", ["paris"]) == 0
    assert exact_match("anything", ["", "zzz"]) == 0
    with pytest.raises(ValueError):
        exact_match("x", [])


def test_f1_examples():
    assert unigram_f1("cat sat", ["the cat sat"]) == pytest.approx(0.8, abs=1e-15)
    assert unigram_f1("dog", ["the cat sat"]) == 0.0
    assert unigram_f1("", [""]) == 1.0
    assert unigram_f1("", ["x"]) == 0.0
    # max over golds
    assert unigram_f1("cat sat", ["dog", "cat sat"]) == 1.0


_word = st.text(alphabet="abcdefg", min_size=1, max_size=4)
_sent = st.lists(_word, min_size=1, max_size=6).map(" ".join)


@given(_sent, _sent)
def test_f1_symmetric(a, b):
    assert unigram_f1(a, [b]) == pytest.approx(unigram_f1(b, [a]), abs=1e-15)


@given(_sent, _sent)
def test_em_case_and_punctuation_invariant(resp, gold):
    assert exact_match(resp, [gold]) == exact_match(resp.upper() + "!", ["," + gold.title()])


def test_token_counters():
    assert token_count("a  b\tc") == 3
    assert token_count("Hi, there!", "normalized") == 2
    assert token_count("abc", "characters") == 3
    with pytest.raises(ConfigError):
        token_count("x", "bpe")


def test_filter_long_answers():
    recs = [_rec("a", ["one two three four five", "one two three four five six"]),
            _rec("b", ["a b c d e f g"]),
            _rec("c", ["short"])]
    out = filter_long_answers(recs, 5)
    assert [r.id for r in out] == ["a", "c"]
    assert out[0].gold_answers == ("one two three four five",)
    assert all(len(normalize(g)) <= 5 for r in out for g in r.gold_answers)


def test_evaluate_checks_token_count():
    rec = _rec()
    res = evaluate(GeneratorResponse("q1", "It is Paris.", 3), rec)
    assert (res.em, res.f1, res.tok) == (1, 0.5, 3)
    with pytest.raises(ValueError, match="disagrees"):
        evaluate(GeneratorResponse("q1", "It is Paris.", 4), rec)
    res = evaluate(GeneratorResponse("q1", "Paris", 1, extra={"evidence": "Paris is the capital"}), rec)
    assert res.tok == 4
    assert res.to_dict()["normalization"]


# noise -----------------------------------------------------------------------

POOL = [f"distractor passage number {i}" for i in range(40)]


def test_distractor_counts():
    assert [distractor_count(n, 5) for n in NSR_GRID] == [0, 5, 10, 15, 20]
    assert distractor_count(200, 1) == 2
    assert distractor_count(50, 1) == 1  # half rounds up
    assert distractor_count(100, 3) == 3


@pytest.mark.parametrize("nsr,k,total", [(0, 1, 1), (200, 1, 3), (400, 5, 25)])
def test_mix_sizes(nsr, k, total):
    rec = _rec(passages=[f"relevant {i}" for i in range(k)])
    mix = mix_noise(rec, POOL, nsr, seed=13)
    assert len(mix.passages) == total
    assert mix.relevant == list(rec.relevant_passages)
    assert len(set(mix.distractors)) == len(mix.distractors)


def test_mix_deterministic_and_roundtrips():
    rec = _rec(passages=["r0", "r1", "r2"])
    a, b = mix_noise(rec, POOL, 300, 13), mix_noise(rec, POOL, 300, 13)
    assert a == b
    assert NoiseMix.from_dict(a.to_dict()) == a
    assert mix_noise(rec, POOL, 300, 14) != a


def test_mix_pool_too_small():
    with pytest.raises(ValueError, match="need 20, have 3"):
        mix_noise(_rec(passages=[f"r{i}" for i in range(5)]), POOL[:3], 400, 0)
    with pytest.raises(ValueError):
        mix_noise(_rec(), POOL, -100, 0)


def test_silver_faithfulness_ignores_distractors():
    rec = _rec(passages=["the tower is in paris", "it opened in 1889"])
    pool = ["bananas are yellow fruit", "the moon orbits earth"] * 10
    for ev, want in (("tower is in paris", 1.0), ("bananas yellow", 0.0)):
        vals = {silver_faithfulness(mix_noise(rec, pool, nsr, 5), ev) for nsr in NSR_GRID}
        assert vals == {want}
    mixed = {silver_faithfulness(mix_noise(rec, pool, nsr, 5), "tower opened bananas") for nsr in NSR_GRID}
    assert len(mixed) == 1 and math.isclose(mixed.pop(), 2 / 3)


def test_drop_percent():
    assert drop_percent(50.0, 40.0) == 20.0
    assert drop_percent(0.8, 0.8) == 0.0
    assert drop_percent(40.0, 50.0) == -25.0
    with pytest.raises(ValueError):
        drop_percent(0.0, 1.0)
