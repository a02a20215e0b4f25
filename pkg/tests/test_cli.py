import json

import numpy as np
import pytest

from topicguide import captioner as cap
from topicguide.checkpoint import load_caption_model
from topicguide.cli import main
from topicguide.corpus import load_corpus
from topicguide.pipeline import PipelineConfig, load_captions, load_topic_file
from topicguide.predictor import assemble_features

SMALL = {"K": 3, "lda_iterations": 60, "lda_burn_in": 20, "lda_thin": 10, "infer_iterations": 20,
         "predictor_hidden": 16, "predictor_epochs": 10, "predictor_lr": 0.01,
         "hidden": 12, "factors": 6, "epochs": 2, "lr": 0.005, "dropout": 0.0, "beam_width": 2}


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    (d / "cfg.json").write_text(json.dumps(SMALL))
    assert main(["synth", "--kind", "lda", "--topics", "3", "--vocab-size", "45",
                 "--videos-per-topic", "20", "--out-dir", str(d / "data")]) == 0
    return d


def run(workdir, *args):
    return main([*args, "--config", str(workdir / "cfg.json")])


def corpus_flags(d):
    return ["--corpus", str(d / "data" / "corpus.jsonl"), "--manifest", str(d / "data" / "manifest.json")]


def test_end_to_end(workdir, capsys):
    d = workdir
    C = corpus_flags(d)
    assert run(d, "mine-topics", *C, "--out", str(d / "topics.tgc")) == 0
    assert run(d, "show-topics", "--topics", str(d / "topics.tgc"), "--words", "4") == 0
    assert run(d, "train-predictor", *C, "--kind", "general", "--topics", str(d / "topics.tgc"),
               "--out", str(d / "pred.tgc")) == 0
    assert run(d, "predict-topics", *C, "--predictor", str(d / "pred.tgc"), "--topics",
               str(d / "topics.tgc"), "--split", "test", "--out", str(d / "pred.jsonl")) == 0
    preds = load_topic_file(d / "pred.jsonl")
    assert all(len(z) == 3 for z in preds.values())
    assert run(d, "train-captioner", *C, "--topic-source", "teacher", "--topics", str(d / "topics.tgc"),
               "--out", str(d / "cap.tgc")) == 0
    assert run(d, "caption", "--corpus", str(d / "data" / "corpus.jsonl"), "--model", str(d / "cap.tgc"),
               "--split", "test", "--topic-source", "predicted", "--topics-file", str(d / "pred.jsonl"),
               "--out", str(d / "caps.jsonl")) == 0
    rows = load_captions(d / "caps.jsonl")
    assert set(rows[0]) == {"video_id", "caption", "log_prob", "variant"}
    assert run(d, "evaluate", "--corpus", str(d / "data" / "corpus.jsonl"), "--captions",
               str(d / "caps.jsonl"), "--out", str(d / "report.json")) == 0
    report = json.loads((d / "report.json").read_text())
    assert report["videos"] == len(rows)
    assert "CIDEr" in capsys.readouterr().out


def test_beam_width_one_is_greedy(workdir):
    d = workdir
    C = corpus_flags(d)
    assert run(d, "train-captioner", *C, "--variant", "tcd", "--topic-source", "annotated",
               "--topics-file", str(d / "data" / "annotated_topics.jsonl"), "--out", str(d / "tcd.tgc")) == 0
    assert run(d, "caption", "--corpus", str(d / "data" / "corpus.jsonl"), "--model", str(d / "tcd.tgc"),
               "--split", "test", "--beam-width", "1", "--topic-source", "annotated", "--topics-file",
               str(d / "data" / "annotated_topics.jsonl"), "--out", str(d / "b1.jsonl")) == 0
    params, vocab, meta = load_caption_model(d / "tcd.tgc")
    topics = load_topic_file(d / "data" / "annotated_topics.jsonl")
    records = {r.video_id: r for r in load_corpus(d / "data" / "corpus.jsonl")}
    from topicguide.corpus import FeatureManifest
    manifest = FeatureManifest(meta["manifest"].items())
    for row in load_captions(d / "b1.jsonl"):
        r = records[row["video_id"]]
        g = cap.greedy_decode(assemble_features(r, manifest), topics[r.video_id], params)
        assert row["caption"] == " ".join(vocab.decode(g.tokens))
        assert row["log_prob"] == pytest.approx(g.log_prob, abs=1e-12)


def test_ablate_topics_one_report_per_k(workdir):
    d = workdir
    assert run(d, "ablate-topics", *corpus_flags(d), "--K-list", "2,3", "--out-dir", str(d / "abl")) == 0
    assert sorted(p.name for p in (d / "abl").iterdir()) == ["report_K2.json", "report_K3.json"]


def test_errors_exit_one(workdir, capsys):
    d = workdir
    assert run(d, "caption", "--corpus", str(d / "data" / "corpus.jsonl"), "--model", str(d / "missing.tgc"),
               "--split", "test", "--out", str(d / "x.jsonl")) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and "error" in err[0]
    assert run(d, "train-captioner", *corpus_flags(d), "--variant", "tgm", "--out", str(d / "y.tgc")) == 1
    (d / "bad.json").write_text(json.dumps({"K": 3, "bogus": 1}))
    assert main(["mine-topics", *corpus_flags(d), "--out", str(d / "z.tgc"), "--config", str(d / "bad.json")]) == 1


def test_gradcheck_command(capsys):
    assert main(["gradcheck"]) == 0
    assert "sequence_loss[tgm]" in capsys.readouterr().out


def test_config_validation():
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"dropout": 1.5})
    with pytest.raises(ValueError):
        PipelineConfig.from_dict({"variant": "lstm"})
    assert PipelineConfig().replace(K=5, lr=None).K == 5
