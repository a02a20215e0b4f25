import dataclasses

import numpy as np
import pytest

from topicguide.corpus import Vocabulary, build_vocabulary, generate_synthetic_corpus, video_document
from topicguide.numerics import make_rng
from topicguide.topics import (argmax_topic, lda_fit, lda_infer, teacher_distribution,
                               top_words, topic_category_cooccurrence, topic_report)


@pytest.fixture(scope="module")
def fitted():
    sc = generate_synthetic_corpus(3, 60, 40, make_rng(0))
    train = [r for r in sc.records if r.split == "train"]
    vocab = build_vocabulary(train)
    docs = [video_document(r, vocab) for r in train]
    model = lda_fit(docs, 3, iterations=200, burn_in=50, thin=10, rng=make_rng(1),
                    vocab_size=len(vocab), doc_ids=[r.video_id for r in train])
    return sc, train, vocab, docs, model


def test_posterior_means_are_distributions(fitted):
    _, _, _, _, model = fitted
    assert np.allclose(model.beta.sum(axis=1), 1.0)
    assert np.allclose(model.theta.sum(axis=1), 1.0)
    assert model.alpha == pytest.approx(50 / 3)


def test_counts_consistent_with_assignments(fitted):
    _, _, _, docs, model = fitted
    assert model.topic_word_counts.sum() == sum(sum(d.values()) for d in docs)
    assert np.array_equal(model.doc_topic_counts.sum(axis=1), [sum(d.values()) for d in docs])
    for d, z in enumerate(model.assignments):
        assert np.array_equal(np.bincount(z, minlength=3), model.doc_topic_counts[d])


def test_topics_align_with_blocks(fitted):
    sc, _, vocab, _, model = fitted
    blocks = [set(b) for b in sc.blocks]
    for k in range(3):
        words = set(top_words(model, k, 10, vocab))
        assert max(len(words & b) for b in blocks) >= 8


def test_fit_is_deterministic(fitted):
    _, _, vocab, docs, model = fitted
    again = lda_fit(docs, 3, iterations=200, burn_in=50, thin=10, rng=make_rng(1), vocab_size=len(vocab))
    assert np.array_equal(again.beta, model.beta)


def test_fold_in_recovers_dominant_topic(fitted):
    sc, _, vocab, _, model = fitted
    test = [(i, r) for i, r in enumerate(sc.records) if r.split == "test"]
    block_of = {}
    for k in range(3):
        ranked = top_words(model, k, 20, vocab)
        block_of[k] = int(np.argmax([len(set(ranked) & set(b)) for b in sc.blocks]))
    hits = 0
    for i, r in test:
        q = lda_infer(video_document(r, vocab), model, rng=make_rng(i))
        assert q.sum() == pytest.approx(1.0)
        hits += block_of[argmax_topic(q)] == sc.topics[i]
    assert hits / len(test) >= 0.9


def test_empty_document_gives_uniform(fitted):
    model = fitted[-1]
    assert np.allclose(lda_infer({}, model, rng=make_rng(0)), 1 / 3)


def test_teacher_distribution_unknown_video(fitted):
    model = fitted[-1]
    with pytest.raises(KeyError):
        teacher_distribution("not-a-video", model)


def test_top_words_tie_break_and_clamp(fitted):
    model = fitted[-1]
    m = dataclasses.replace(model, beta=np.full_like(model.beta, 1.0 / model.vocab_size))
    assert top_words(m, 0, 4) == [0, 1, 2, 3]
    assert len(top_words(m, 0, 10 ** 6)) == model.vocab_size
    with pytest.raises(IndexError):
        top_words(m, 5)


def test_cooccurrence_and_report(fitted):
    sc, train, vocab, _, model = fitted
    co = topic_category_cooccurrence(train, model, n_categories=20)
    assert co["videos"] == len(train)
    assert co["counts"].sum() == len(train)
    rows = co["percent"].sum(axis=1)
    assert np.allclose(rows[rows > 0], 100.0)
    # each topic maps almost entirely to one category
    assert all(co["percent"][k].max() > 90 for k in range(3))
    rep = topic_report(model, vocab, co)
    assert len(rep["topics"]) == 3 and len(rep["topics"][0]["words"]) == 10


def test_rejects_bad_arguments():
    with pytest.raises(ValueError):
        lda_fit([{0: 1}], 1, rng=make_rng(0))
    with pytest.raises(ValueError):
        lda_fit([{0: 1}], 2, iterations=10, burn_in=10, rng=make_rng(0))
