import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from topicguide.metrics import (EvalPair, bleu4, cider, cider_scores, evaluate_corpus, format_report,
                                lcs_length, paired_bootstrap, rouge_l)
from topicguide.numerics import make_rng


def as_pairs(hyps, refs):
    return [EvalPair(f"v{i}", tuple(h), tuple(tuple(r) for r in rs)) for i, (h, rs) in enumerate(zip(hyps, refs))]


@pytest.mark.parametrize("seed", range(50))
def test_metrics_match_oracles(seed):
    hyps, refs = oracles.random_corpus(make_rng(seed))
    pairs = as_pairs(hyps, refs)
    assert bleu4(pairs) == pytest.approx(oracles.bleu4(hyps, refs), abs=1e-9)
    assert rouge_l(pairs) == pytest.approx(oracles.rouge_l(hyps, refs), abs=1e-9)
    assert cider(pairs) == pytest.approx(oracles.cider(hyps, refs), abs=1e-9)


toks = st.lists(st.sampled_from("abcd"), max_size=8)


@settings(max_examples=200)
@given(toks, toks)
def test_lcs_against_recursion(a, b):
    assert lcs_length(a, b) == oracles.lcs(a, b)


def test_identical_corpus():
    pairs = [EvalPair("a", tuple("a man rides a horse".split()), (tuple("a man rides a horse".split()),)),
             EvalPair("b", tuple("two dogs play in snow".split()), (tuple("two dogs play in snow".split()),))]
    assert bleu4(pairs) == 1.0
    assert rouge_l(pairs) == 1.0
    assert cider(pairs) > 0


def test_known_values():
    p = [EvalPair("a", ("the", "cat"), (("the", "cat", "sat"),))]
    assert bleu4(p) == 0.0                      # no 3- or 4-gram matches, no smoothing
    r = 2 / 3
    assert rouge_l(p) == pytest.approx((1 + 1.44) * r / (r + 1.44))


def test_brevity_penalty_uses_closest_reference():
    hyp = tuple("a b c d e".split())
    p = [EvalPair("a", hyp, (hyp + ("x",) * 5, hyp + ("y",)))]
    # closest reference has length 6
    assert bleu4(p) == pytest.approx(np.exp(1 - 6 / 5))


def test_cider_single_video_corpus_is_zero():
    # log(N / df) vanishes for every n-gram when N = 1
    assert cider([EvalPair("a", ("x", "y"), (("x", "y"),))]) == 0.0


def test_empty_inputs():
    with pytest.raises(ValueError):
        bleu4([])
    with pytest.raises(ValueError):
        EvalPair("a", ("x",), ())
    assert rouge_l([EvalPair("a", (), (("x",),))]) == 0.0


def test_evaluate_corpus_order_independent():
    hyps, refs = oracles.random_corpus(make_rng(99), n_videos=5)
    pairs = as_pairs(hyps, refs)
    a, b = evaluate_corpus(pairs), evaluate_corpus(pairs[::-1])
    assert a == b
    assert a["cider"] == pytest.approx(np.mean(cider_scores(pairs)))
    assert "CIDEr" in format_report({"sys": a})


def test_paired_bootstrap():
    rng = make_rng(0)
    assert paired_bootstrap([1.0] * 20, [0.0] * 20, rng) == 0.0
    assert paired_bootstrap([0.0] * 20, [1.0] * 20, rng) == 1.0
