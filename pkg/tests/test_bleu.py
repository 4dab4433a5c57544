"""BLEU tests against hand-counted n-gram statistics, degenerate corpora,
and order-invariance."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptmt.errors import ConfigError
from promptmt.evaluate import bleu4


def toks(*sentences):
    return [s.split() for s in sentences]


def test_identical_corpus_is_100():
    hyps = toks("a small dog runs fast", "the sky is very blue today")
    assert bleu4(hyps, [list(h) for h in hyps]) == pytest.approx(100.0)


def test_disjoint_four_grams_score_zero():
    hyps = toks("a b c d e")
    refs = toks("a b c x d e")  # shares up to 3-grams, no 4-gram
    assert bleu4(hyps, refs) == 0.0


def test_no_overlap_at_all_scores_zero():
    assert bleu4(toks("q w e r t"), toks("a s d f g")) == 0.0


def test_hand_counted_two_sentence_corpus():
    # hyp1/ref1: clipped 1..4-grams 5/6, 3/5, 2/4, 1/3
    # hyp2/ref2: clipped 1..4-grams 4/5, 3/4, 2/3, 1/2
    # precisions 9/11, 6/9, 4/7, 2/5; c=11, r=12 -> bp=exp(-1/11)
    hyps = toks("the cat sat on the mat", "a quick brown fox jumps")
    refs = toks("the cat sat on a mat", "the quick brown fox jumps high")
    expected = 100.0 * math.exp(1.0 - 12.0 / 11.0) * (
        (9 / 11) * (6 / 9) * (4 / 7) * (2 / 5)) ** 0.25
    assert bleu4(hyps, refs) == pytest.approx(expected, abs=1e-6)


def test_hand_counted_equal_length_pair():
    # single pair, same length: precisions 4/5, 3/4, 2/3, 1/2 and bp = 1
    expected = 100.0 * (0.8 * 0.75 * (2 / 3) * 0.5) ** 0.25
    assert bleu4(toks("a b c d e"), toks("a b c d f")) == \
        pytest.approx(expected, abs=1e-6)


def test_hand_counted_brevity_penalty():
    # perfect precisions but hypothesis 4 tokens vs reference 5:
    # bp = exp(1 - 5/4)
    expected = 100.0 * math.exp(1.0 - 5.0 / 4.0)
    assert bleu4(toks("x y z w"), toks("x y z w v")) == \
        pytest.approx(expected, abs=1e-6)


def test_short_hypotheses_without_4grams_score_zero():
    assert bleu4(toks("a b c"), toks("a b c")) == 0.0


def test_empty_corpus_rejected():
    with pytest.raises(ConfigError, match="empty"):
        bleu4([], [])


def test_length_mismatch_rejected():
    with pytest.raises(ConfigError, match="hypotheses"):
        bleu4(toks("a b"), toks("a b", "c d"))


@settings(max_examples=40)
@given(st.permutations(range(4)))
def test_corpus_bleu_is_order_invariant(perm):
    hyps = toks("a b c d e", "the cat sat down here",
                "x y z w v u", "one two three four five")
    refs = toks("a b c d f", "the cat sat down there",
                "x y z w v t", "one two three four six")
    base = bleu4(hyps, refs)
    shuffled = bleu4([hyps[i] for i in perm], [refs[i] for i in perm])
    assert shuffled == pytest.approx(base, abs=1e-12)


def test_self_eval_mode_is_100():
    hyps = toks("some longer sentence goes right here",
                "another one with enough tokens inside")
    assert bleu4(hyps, hyps) == pytest.approx(100.0)
