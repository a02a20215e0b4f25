"""Command line entry point: ``topicguide <command> [flags]``.

Every command reads its inputs from disk, writes machine-readable outputs
to the paths given, prints a short human summary, and exits 0. Any failure
exits 1 with a single diagnostic line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import captioner as cap
from .checkpoint import (CheckpointError, load_caption_model, load_mlp, load_topic_model,
                         save_caption_model, save_mlp, save_topic_model)
from .corpus import (FeatureManifest, STOPWORDS, build_vocabulary, generate_styled_corpus,
                     generate_synthetic_corpus, load_corpus, load_stopwords, save_corpus,
                     video_document)
from .gradcheck import run_gradient_suite
from .metrics import format_report, save_report
from .numerics import make_rng
from .pipeline import (TOPIC_SOURCES, PipelineConfig, caption_data, category_distribution,
                       evaluate_captions, generate_captions, load_captions, load_topic_file,
                       save_captions, save_topic_file, worker_count)
from .predictor import (TopicPrediction, ensemble, predict_category, predict_general,
                        predict_speech, save_predictions, train_category_classifier,
                        train_general_predictor)
from .topics import (format_topic_report, lda_fit, save_topic_report, teacher_distribution,
                     topic_category_cooccurrence, topic_report)

log = logging.getLogger("topicguide")

CONFIG_FLAGS = {
    "seed": int, "min_count": int, "K": int, "alpha": float, "eta": float,
    "lda_iterations": int, "lda_burn_in": int, "lda_thin": int, "infer_iterations": int,
    "predictor_hidden": int, "predictor_lr": float, "predictor_epochs": int,
    "predictor_batch_size": int, "variant": str, "hidden": int, "factors": int,
    "lr": float, "epochs": int, "batch_size": int, "dropout": float,
    "beam_width": int, "max_len": int,
}


class UsageError(Exception):
    pass


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig().validate()
    overrides = {k: getattr(args, k, None) for k in CONFIG_FLAGS}
    if getattr(args, "category_one_hot", False):
        overrides["category_one_hot"] = True
    return cfg.replace(**overrides)


def _corpus(args):
    manifest = FeatureManifest.load(args.manifest)
    return load_corpus(args.corpus, manifest), manifest


def _split(records, split):
    chosen = [r for r in records if r.split == split]
    if not chosen:
        raise UsageError(f"no videos in split {split!r}")
    return chosen


def _stopwords(args):
    return load_stopwords(args.stopwords) if getattr(args, "stopwords", None) else STOPWORDS


def _out(path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


# commands -----------------------------------------------------------------

def cmd_synth(args, cfg):
    rng = make_rng(cfg.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "styled":
        sc = generate_styled_corpus(args.topics, args.objects, args.videos_per_cell, rng)
    else:
        sc = generate_synthetic_corpus(args.topics, args.vocab_size, args.videos_per_topic, rng)
    save_corpus(sc.records, out / "corpus.jsonl")
    sc.manifest.save(out / "manifest.json")
    save_topic_file({r.video_id: sc.mixtures[i] for i, r in enumerate(sc.records)},
                    out / "annotated_topics.jsonl")
    print(f"wrote {len(sc.records)} videos to {out / 'corpus.jsonl'}")


def cmd_mine_topics(args, cfg):
    records, _ = _corpus(args)
    train = _split(records, "train")
    vocab = build_vocabulary(train, cfg.min_count)
    docs = [video_document(r, vocab, _stopwords(args)) for r in train]
    model = lda_fit(docs, cfg.K, alpha=cfg.alpha, eta=cfg.eta, iterations=cfg.lda_iterations,
                    burn_in=cfg.lda_burn_in, thin=cfg.lda_thin, rng=make_rng(cfg.seed),
                    vocab_size=len(vocab), doc_ids=[r.video_id for r in train])
    save_topic_model(_out(args.out), model, vocab, {"config": cfg.to_dict()})
    print(f"mined {cfg.K} topics from {len(train)} training videos "
          f"({sum(sum(d.values()) for d in docs)} tokens, vocabulary {len(vocab)})")


def cmd_show_topics(args, cfg):
    model, vocab, _ = load_topic_model(args.topics)
    co = None
    if args.corpus:
        records, _ = _corpus(args)
        co = topic_category_cooccurrence(records, model)
    report = topic_report(model, vocab, co, n_words=args.words)
    if args.out:
        save_topic_report(report, _out(args.out))
    print(format_topic_report(report))


def cmd_cooccurrence(args, cfg):
    model, _, _ = load_topic_model(args.topics)
    records, _ = _corpus(args)
    co = topic_category_cooccurrence(records, model)
    if args.out:
        with open(_out(args.out), "w", encoding="utf-8") as f:
            json.dump({"counts": co["counts"].tolist(), "percent": co["percent"].tolist(),
                       "videos": co["videos"]}, f, indent=2)
    used = np.flatnonzero(co["counts"].sum(axis=0))
    print("topic  " + " ".join(f"{c:>6d}" for c in used))
    for k in range(model.K):
        print(f"{k:>5}  " + " ".join(f"{co['percent'][k, c]:>5.1f}%" for c in used))


def cmd_train_predictor(args, cfg):
    records, manifest = _corpus(args)
    train = _split(records, "train")
    rng = make_rng(cfg.seed)
    common = dict(epochs=cfg.predictor_epochs, rng=rng, lr=cfg.predictor_lr,
                  batch_size=cfg.predictor_batch_size, hidden=cfg.predictor_hidden)
    if args.kind == "category":
        params = train_category_classifier(train, manifest, **common)
    else:
        if not args.topics:
            raise UsageError("--topics is required for the general topic predictor")
        model, _, _ = load_topic_model(args.topics)
        teachers = {r.video_id: teacher_distribution(r, model) for r in train}
        params = train_general_predictor(train, teachers, manifest, **common)
    save_mlp(_out(args.out), params, args.kind, {"config": cfg.to_dict()})
    print(f"trained {args.kind} predictor on {len(train)} videos")


def cmd_predict_topics(args, cfg):
    records, manifest = _corpus(args)
    chosen = _split(records, args.split)
    params, _ = load_mlp(args.predictor, "general")
    model, vocab, _ = load_topic_model(args.topics)
    preds = {}
    for i, r in enumerate(chosen):
        general = predict_general(r, params, manifest)
        speech = None
        if not args.no_speech:
            speech = predict_speech(r, model, vocab, rng=make_rng(cfg.seed + i),
                                    stopwords=_stopwords(args), iterations=cfg.infer_iterations)
        preds[r.video_id] = ensemble(general, speech)
    save_predictions(preds, _out(args.out))
    n_speech = sum("speech" in p.sources for p in preds.values())
    print(f"predicted topics for {len(preds)} videos ({n_speech} with speech)")


def _topics_for(records, args, cfg, n_topics_hint=None):
    """Resolve the per-video topic distributions named by --topic-source."""
    source = args.topic_source
    if source == "teacher":
        model, _, _ = load_topic_model(args.topics)
        return {r.video_id: teacher_distribution(r, model) for r in records}, model.K
    if source in ("predicted", "annotated"):
        if not args.topics_file:
            raise UsageError(f"--topics-file is required for --topic-source {source}")
        topics = load_topic_file(args.topics_file)
        missing = [r.video_id for r in records if r.video_id not in topics]
        if missing:
            raise UsageError(f"{args.topics_file} lacks topics for {len(missing)} videos, e.g. {missing[0]}")
        return topics, len(next(iter(topics.values())))
    if source == "category":
        if getattr(args, "category_model", None):
            params, _ = load_mlp(args.category_model, "category")
            return {r.video_id: predict_category(r, params, cfg.category_one_hot) for r in records}, \
                params.out_dim
        missing = [r.video_id for r in records if r.category is None]
        if missing:
            raise UsageError(f"{len(missing)} videos lack category tags; pass --category-model")
        return {r.video_id: category_distribution(r.category) for r in records}, 20
    raise UsageError(f"unknown topic source {source!r}")


def cmd_train_captioner(args, cfg):
    records, manifest = _corpus(args)
    train = _split(records, "train")
    vocab = build_vocabulary(train, cfg.min_count)
    if cfg.variant == "vanilla" and args.topic_source is None:
        topics, K = None, 1
    else:
        if args.topic_source is None:
            raise UsageError("--topic-source is required for topic-guided variants")
        topics, K = _topics_for(train, args, cfg)
    data = caption_data(train, vocab, manifest, topics, K, cfg.max_len)
    params = cap.init_caption_model(cfg.variant, manifest.total_dim, len(vocab), K,
                                    make_rng(cfg.seed), n_h=cfg.hidden, n_f=cfg.factors)
    history = cap.train_captioner(params, data, epochs=cfg.epochs, rng=make_rng(cfg.seed + 1),
                                  batch_size=cfg.batch_size, lr=cfg.lr, dropout=cfg.dropout,
                                  callback=lambda e, l: log.info("epoch %d loss %.4f", e, l))
    save_caption_model(_out(args.out), params, vocab,
                       {"config": cfg.to_dict(), "manifest": manifest.to_json(),
                        "topic_source": args.topic_source})
    final = f"{history[-1]:.4f}" if history else "n/a"
    print(f"trained {cfg.variant} on {len(data.pairs)} caption pairs; final loss {final}; "
          f"train perplexity {cap.perplexity(params, data):.4f}")


def cmd_caption(args, cfg):
    params, vocab, meta = load_caption_model(args.model)
    manifest = FeatureManifest(meta["manifest"].items())
    records = load_corpus(args.corpus, manifest)
    chosen = _split(records, args.split)
    topics = None
    if params.variant != "vanilla" or args.topic_source:
        if args.topic_source is None:
            raise UsageError("--topic-source is required for topic-guided variants")
        topics, K = _topics_for(chosen, args, cfg)
        if K != params.n_topics:
            raise UsageError(f"topic source has {K} topics, model expects {params.n_topics}")
    rows = generate_captions(chosen, params, vocab, manifest, topics,
                             beam_width=cfg.beam_width, max_len=cfg.max_len,
                             workers=worker_count(args.workers))
    save_captions(rows, _out(args.out))
    print(f"captioned {len(rows)} videos with {params.variant} (beam {cfg.beam_width})")


def cmd_evaluate(args, cfg):
    records = load_corpus(args.corpus)
    rows = load_captions(args.captions)
    report = evaluate_captions(rows, records)
    if args.out:
        save_report(report, _out(args.out))
    name = rows[0].get("variant", "system") if rows else "system"
    print(format_report({name: report}))


def cmd_gradcheck(args, cfg):
    results = run_gradient_suite(make_rng(cfg.seed))
    worst = 0.0
    for name, err in results.items():
        print(f"{name:<24} {err:.3e}")
        worst = max(worst, err)
    if worst >= args.tolerance:
        raise UsageError(f"max relative gradient error {worst:.3e} exceeds {args.tolerance:g}")


def cmd_ablate_topics(args, cfg):
    from .ablation import ablate_topic_counts

    records, manifest = _corpus(args)
    ks = [int(k) for k in args.K_list.split(",") if k.strip()]
    if not ks:
        raise UsageError("--K-list is empty")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = ablate_topic_counts(records, manifest, ks, cfg, stopwords=_stopwords(args),
                                  workers=worker_count(args.workers))
    for k, rep in reports.items():
        save_report(rep, out / f"report_K{k}.json")
    print(format_report({f"K={k}": rep for k, rep in reports.items()}))


# parser ---------------------------------------------------------------------

def _add_config_flags(p):
    p.add_argument("--config", help="JSON config file; flags override its values")
    for name, typ in CONFIG_FLAGS.items():
        p.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)


def _add_corpus(p, required=True):
    p.add_argument("--corpus", required=required)
    p.add_argument("--manifest", required=required)


def _add_topic_source(p):
    p.add_argument("--topic-source", choices=TOPIC_SOURCES)
    p.add_argument("--topics", help="topic model checkpoint (teacher source)")
    p.add_argument("--topics-file", help="per-video distributions (predicted/annotated source)")
    p.add_argument("--category-model", help="category classifier checkpoint")
    p.add_argument("--category-one-hot", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topicguide", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--kind", choices=("lda", "styled"), default="lda")
    p.add_argument("--topics", type=int, default=3)
    p.add_argument("--vocab-size", type=int, default=150)
    p.add_argument("--videos-per-topic", type=int, default=100)
    p.add_argument("--objects", type=int, default=6)
    p.add_argument("--videos-per-cell", type=int, default=5)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mine-topics", help="fit LDA on training captions")
    _add_corpus(p)
    p.add_argument("--stopwords")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine_topics)

    p = sub.add_parser("show-topics", help="top words per topic")
    p.add_argument("--topics", required=True)
    _add_corpus(p, required=False)
    p.add_argument("--words", type=int, default=10)
    p.add_argument("--out")
    p.set_defaults(func=cmd_show_topics)

    p = sub.add_parser("cooccurrence", help="topic vs category table")
    p.add_argument("--topics", required=True)
    _add_corpus(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_cooccurrence)

    p = sub.add_parser("train-predictor", help="train the topic or category predictor")
    _add_corpus(p)
    p.add_argument("--kind", choices=("general", "category"), default="general")
    p.add_argument("--topics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_predictor)

    p = sub.add_parser("predict-topics", help="ensemble topic predictions for a split")
    _add_corpus(p)
    p.add_argument("--predictor", required=True)
    p.add_argument("--topics", required=True)
    p.add_argument("--stopwords")
    p.add_argument("--split", default="test")
    p.add_argument("--no-speech", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict_topics)

    p = sub.add_parser("train-captioner", help="train a caption model")
    _add_corpus(p)
    _add_topic_source(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_captioner)

    p = sub.add_parser("caption", help="beam-search captions for a split")
    p.add_argument("--corpus", required=True)
    p.add_argument("--model", required=True)
    _add_topic_source(p)
    p.add_argument("--split", default="test")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_caption)

    p = sub.add_parser("evaluate", help="BLEU@4 / ROUGE-L / CIDEr of generated captions")
    p.add_argument("--corpus", required=True)
    p.add_argument("--captions", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference check of every analytic gradient")
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("ablate-topics", help="full pipeline for several topic counts")
    _add_corpus(p)
    p.add_argument("--K-list", dest="K_list", default="10,20,30")
    p.add_argument("--stopwords")
    p.add_argument("--workers", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_ablate_topics)

    for p in sub.choices.values():
        _add_config_flags(p)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        args.func(args, cfg)
    except (UsageError, ValueError, KeyError, OSError, CheckpointError) as exc:
        msg = str(exc).strip().splitlines()[0] if str(exc).strip() else type(exc).__name__
        print(f"topicguide {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
