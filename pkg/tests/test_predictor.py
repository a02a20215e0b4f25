import json

import numpy as np
import pytest

from topicguide.corpus import FeatureManifest, VideoRecord, generate_synthetic_corpus
from topicguide.numerics import make_rng
from topicguide.predictor import (assemble_features, ensemble, kl_divergence, load_predictions,
                                  predict_category, predict_general, save_predictions,
                                  train_category_classifier, train_general_predictor)


def test_missing_modality_is_zero_filled():
    m = FeatureManifest([("a", 2), ("b", 3)])
    r = VideoRecord("x", "test", (), features={"b": np.array([1.0, 2.0, 3.0])})
    assert assemble_features(r, m).tolist() == [0, 0, 1, 2, 3]


def test_kl_properties():
    p = np.array([[0.5, 0.5, 0.0]])
    assert kl_divergence(p, p)[0] == pytest.approx(0.0, abs=1e-12)
    assert kl_divergence(p, np.array([[0.25, 0.25, 0.5]]))[0] == pytest.approx(np.log(2))


def test_ensemble_averages_available_sources():
    g = np.array([0.6, 0.4])
    assert ensemble(g).sources == ("general",)
    e = ensemble(g, np.array([0.2, 0.8]))
    assert e.sources == ("general", "speech")
    assert np.allclose(e.distribution, [0.4, 0.6])


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic_corpus(3, 30, 30, make_rng(0), noise=0.01)


def test_student_learns_teacher(corpus):
    train = [r for r in corpus.records if r.split == "train"]
    idx = [i for i, r in enumerate(corpus.records) if r.split == "train"]
    params = train_general_predictor(train, corpus.mixtures[idx], corpus.manifest, epochs=150,
                                     rng=make_rng(1), lr=3e-3, hidden=32)
    Q = np.array([predict_general(r, params) for r in train])
    assert kl_divergence(corpus.mixtures[idx], Q).mean() < 0.05


def test_teacher_mapping_must_cover_records(corpus):
    train = [r for r in corpus.records if r.split == "train"]
    with pytest.raises(ValueError):
        train_general_predictor(train, {}, corpus.manifest, epochs=1, rng=make_rng(0))


def test_category_classifier(corpus):
    train = [r for r in corpus.records if r.split == "train"]
    test = [r for r in corpus.records if r.split != "train"]
    params = train_category_classifier(train, corpus.manifest, epochs=100, rng=make_rng(2),
                                       lr=3e-3, hidden=32)
    acc = np.mean([np.argmax(predict_category(r, params)) == r.category for r in test])
    assert acc >= 0.9
    one = predict_category(test[0], params, one_hot=True)
    assert one.sum() == 1.0 and one.shape == (20,)


def test_prediction_file_round_trip(tmp_path):
    preds = {"a": ensemble(np.array([0.3, 0.7])), "b": ensemble(np.array([1.0, 0.0]), np.array([0.0, 1.0]))}
    save_predictions(preds, tmp_path / "p.jsonl")
    back = load_predictions(tmp_path / "p.jsonl")
    assert back["b"].sources == ("general", "speech")
    assert np.array_equal(back["a"].distribution, preds["a"].distribution)
    row = json.loads((tmp_path / "p.jsonl").read_text().splitlines()[0])
    assert set(row) == {"video_id", "topics", "sources"}
