from itertools import combinations

import pytest
from hypothesis import given, settings, strategies as st

from evidence_align.dedup import DedupConfig, dedup, ngram_similarity, passthrough


def dice_by_enumeration(a: str, b: str, n: int) -> float:
    """Independent oracle: list every n-gram as a string and count matches pairwise."""
    def grams(t):
        w = t.lower().split()
        k = n if len(w) >= n else 1
        return [" ".join(w[i:i + k]) for i in range(len(w) - k + 1)]

    ga, gb = grams(a), grams(b)
    if not ga and not gb:
        return 1.0
    pool = list(gb)
    matched = 0
    for g in ga:
        if g in pool:
            pool.remove(g)
            matched += 1
    return 2 * matched / (len(ga) + len(gb))


BIGRAM = DedupConfig(n=2, threshold=0.5)


@pytest.mark.parametrize("a, b, expected", [
    ("x y z", "x y z", 1.0),
    ("a b c", "p q r", 0.0),
    ("a b c", "a b d", 0.5),
    ("a b c d", "a b c e", 2 * 2 / 6),
    ("", "", 1.0),
    ("", "a b", 0.0),
])
def test_similarity_examples(a, b, expected):
    assert ngram_similarity(a, b, BIGRAM) == pytest.approx(expected, abs=1e-15)
    assert dice_by_enumeration(a, b, 2) == pytest.approx(expected, abs=1e-15)


def test_short_text_falls_back_to_unigrams():
    cfg = DedupConfig(n=3)
    assert ngram_similarity("alpha", "alpha beta", cfg) == pytest.approx(dice_by_enumeration("alpha", "alpha beta", 3))
    assert ngram_similarity("alpha", "ALPHA", cfg) == 1.0


def test_ten_identical_collapse():
    out = dedup(["same evidence text"] * 10)
    assert out.candidates == ("same evidence text",) and out.deduped


def test_disjoint_is_noop():
    samples = ["a b c", "d e f", "g h i", "j k l"]
    assert list(dedup(samples, BIGRAM).candidates) == samples


def test_keeps_first_of_near_duplicates():
    out = dedup(["a b c d", "a b c e", "p q r s"], BIGRAM)
    assert out.candidates == ("a b c d", "p q r s")


def test_empty_input():
    with pytest.raises(ValueError, match="no samples"):
        dedup([])


@pytest.mark.parametrize("kw", [{"n": 0}, {"threshold": 0.0}, {"threshold": 1.5}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        DedupConfig(**kw)


def test_passthrough_keeps_everything():
    assert passthrough(["x", "x"]).candidates == ("x", "x")


_words = st.sampled_from(["a", "b", "c", "d", "e", "the", "cat"])
_texts = st.lists(_words, max_size=6).map(" ".join)


@given(_texts, _texts, st.integers(1, 3))
def test_similarity_matches_oracle_and_is_symmetric(a, b, n):
    cfg = DedupConfig(n=n)
    s = ngram_similarity(a, b, cfg)
    assert s == ngram_similarity(b, a, cfg)
    assert 0.0 <= s <= 1.0
    assert s == pytest.approx(dice_by_enumeration(a, b, n), abs=1e-12)


@settings(max_examples=200)
@given(st.lists(_texts, min_size=1, max_size=10), st.integers(1, 3), st.floats(0.05, 1.0))
def test_dedup_laws(samples, n, threshold):
    cfg = DedupConfig(n=n, threshold=threshold)
    out = dedup(samples, cfg).candidates
    assert 1 <= len(out) <= len(samples)
    assert dedup(list(out), cfg).candidates == out
    for x, y in combinations(out, 2):
        assert ngram_similarity(x, y, cfg) < threshold
    # survivors appear in sample order
    positions = [samples.index(c) for c in out]
    assert positions == sorted(positions)
