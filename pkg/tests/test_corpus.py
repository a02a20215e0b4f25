import json
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topicguide.corpus import (FeatureManifest, VideoRecord, Vocabulary, build_vocabulary,
                               caption_ids, clean_speech, generate_styled_corpus,
                               generate_synthetic_corpus, load_corpus, save_corpus,
                               to_bag_of_words, tokenize, video_document)
from topicguide.numerics import make_rng


def test_tokenize_lowercases_and_splits_punctuation():
    assert tokenize("A man's dog, running-fast!") == ["a", "man", "s", "dog", "running", "fast"]
    assert tokenize("") == []


words = st.sampled_from(["cat", "dog", "man", "runs", "red", "car", "a", "the"])
captions = st.lists(words, min_size=1, max_size=6).map(" ".join)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.lists(captions, min_size=1, max_size=4), min_size=1, max_size=6),
       st.integers(1, 4))
def test_vocabulary_matches_brute_force_count(videos, min_count):
    records = [VideoRecord(f"v{i}", "train", tuple(c)) for i, c in enumerate(videos)]
    vocab = build_vocabulary(records, min_count)
    counts = Counter()
    for c in (c for v in videos for c in v):
        for w in c.split():
            counts[w] += 1
    expected = [w for w, n in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])) if n >= min_count]
    assert vocab.itos[:3] == ["<bos>", "<eos>", "<unk>"]
    assert vocab.itos[3:] == expected


def test_vocabulary_ignores_non_training_splits():
    recs = [VideoRecord("a", "train", ("cat cat cat",)), VideoRecord("b", "test", ("dog dog dog",))]
    assert "dog" not in build_vocabulary(recs)


def test_vocabulary_round_trip_and_unk():
    v = Vocabulary(["cat", "dog"])
    assert Vocabulary.from_json(json.loads(json.dumps(v.to_json()))) == v
    assert v.encode(["cat", "zebra"]) == [3, 2]
    assert v.decode([0, 3, 4, 1]) == ["cat", "dog"]


def test_caption_ids_truncation_keeps_eos():
    v = Vocabulary([f"w{i}" for i in range(50)])
    ids = caption_ids(" ".join(f"w{i}" for i in range(40)), v, max_len=30)
    assert len(ids) == 30 and ids[-1] == v.eos


def test_bag_of_words_drops_stopwords_and_oov():
    v = Vocabulary(["cat", "the"])
    assert to_bag_of_words(["the", "cat", "cat", "zebra"], v) == {3: 2}


def test_clean_speech_threshold():
    v = Vocabulary(["cat", "dog"])
    assert clean_speech("cat dog " * 4 + "zebra", v) is None
    assert clean_speech("cat dog " * 5, v) == ["cat", "dog"] * 5
    assert clean_speech(None, v) is None


def test_record_validation():
    with pytest.raises(ValueError):
        VideoRecord("x", "train", ())
    with pytest.raises(ValueError):
        VideoRecord("x", "bogus", ("a",))
    with pytest.raises(ValueError):
        VideoRecord("x", "test", (), category=25)


def test_manifest_validates_widths():
    m = FeatureManifest([("a", 2), ("b", 3)])
    assert m.total_dim == 5
    with pytest.raises(ValueError):
        m.validate(VideoRecord("x", "test", (), features={"a": np.zeros(3)}))
    with pytest.raises(ValueError):
        m.validate(VideoRecord("x", "test", (), features={"c": np.zeros(2)}))


def test_corpus_file_round_trip(tmp_path):
    sc = generate_synthetic_corpus(3, 30, 5, make_rng(0))
    save_corpus(sc.records, tmp_path / "c.jsonl")
    back = load_corpus(tmp_path / "c.jsonl", sc.manifest)
    assert [r.to_json() for r in back] == [r.to_json() for r in sc.records]


def test_synthetic_corpus_structure():
    sc = generate_synthetic_corpus(4, 40, 10, make_rng(1))
    assert len(sc.records) == 40
    assert np.allclose(sc.mixtures.sum(axis=1), 1.0)
    blocks = sc.blocks
    assert all(len(b) == 10 for b in blocks)
    assert not set(blocks[0]) & set(blocks[1])
    assert {r.split for r in sc.records} == {"train", "val", "test"}
    assert all(r.category == sc.topics[i] for i, r in enumerate(sc.records))
    vocab = build_vocabulary(sc.records)
    doc = video_document(sc.records[0], vocab)
    assert sum(doc.values()) > 0


def test_styled_corpus_topics_set_word_order():
    sc = generate_styled_corpus(4, 2, 2, make_rng(2), captions_per_video=5, dominance=1.0)
    slots = ("subj", "verb", "obj", "place", "time")
    for i, r in enumerate(sc.records):
        t = sc.topics[i]
        words = tokenize(r.captions[0])
        # topic t walks the five slots with stride t + 1
        assert [w.rstrip("0123456789") for w in words] == [slots[(j * (t + 1)) % 5] for j in range(5)]
        assert f"obj{sc.objects[i]}" in words


def test_styled_corpus_object_words():
    sc = generate_styled_corpus(3, 4, 1, make_rng(3), word_source="object", synonyms=1)
    for i, r in enumerate(sc.records):
        o = sc.objects[i]
        assert set(tokenize(r.captions[0])) == {f"subj{o}", f"verb{o}", f"obj{o}", f"place{o}", f"time{o}"}


def test_generators_are_deterministic():
    a = generate_styled_corpus(3, 3, 2, make_rng(5))
    b = generate_styled_corpus(3, 3, 2, make_rng(5))
    assert [r.to_json() for r in a.records] == [r.to_json() for r in b.records]
