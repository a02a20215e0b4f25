"""Topic-count ablation: the full mine, distil, caption, evaluate loop run
once per K on the same corpus and seeds."""

from __future__ import annotations

import logging
from typing import Dict, Sequence

from . import captioner as cap
from .corpus import STOPWORDS, FeatureManifest, VideoRecord, build_vocabulary, video_document
from .numerics import make_rng
from .pipeline import PipelineConfig, caption_data, evaluate_captions, generate_captions
from .predictor import ensemble, predict_general, predict_speech, train_general_predictor
from .topics import lda_fit, teacher_distribution

log = logging.getLogger(__name__)


def run_topic_pipeline(records: Sequence[VideoRecord], manifest: FeatureManifest,
                       cfg: PipelineConfig, *, stopwords=STOPWORDS, workers: int = 1) -> dict:
    """Train on the ``train`` split and score beam-search captions on ``test``.

    The captioner is trained on teacher (mined) distributions and decodes
    with the ensemble prediction, as at deployment.
    """
    train = [r for r in records if r.split == "train"]
    test = [r for r in records if r.split == "test"]
    if not train or not test:
        raise ValueError("the corpus needs both train and test videos")
    vocab = build_vocabulary(train, cfg.min_count)
    docs = [video_document(r, vocab, stopwords) for r in train]
    model = lda_fit(docs, cfg.K, alpha=cfg.alpha, eta=cfg.eta, iterations=cfg.lda_iterations,
                    burn_in=cfg.lda_burn_in, thin=cfg.lda_thin, rng=make_rng(cfg.seed),
                    vocab_size=len(vocab), doc_ids=[r.video_id for r in train])
    teachers = {r.video_id: teacher_distribution(r, model) for r in train}
    student = train_general_predictor(train, teachers, manifest, epochs=cfg.predictor_epochs,
                                      rng=make_rng(cfg.seed + 1), lr=cfg.predictor_lr,
                                      batch_size=cfg.predictor_batch_size,
                                      hidden=cfg.predictor_hidden)
    predicted = {}
    for i, r in enumerate(test):
        speech = predict_speech(r, model, vocab, rng=make_rng(cfg.seed + 2 + i),
                                stopwords=stopwords, iterations=cfg.infer_iterations)
        predicted[r.video_id] = ensemble(predict_general(r, student, manifest), speech).distribution

    data = caption_data(train, vocab, manifest, teachers, cfg.K, cfg.max_len)
    params = cap.init_caption_model(cfg.variant, manifest.total_dim, len(vocab), cfg.K,
                                    make_rng(cfg.seed + 3), n_h=cfg.hidden, n_f=cfg.factors)
    cap.train_captioner(params, data, epochs=cfg.epochs, rng=make_rng(cfg.seed + 4),
                        batch_size=cfg.batch_size, lr=cfg.lr, dropout=cfg.dropout)
    rows = generate_captions(test, params, vocab, manifest, predicted,
                             beam_width=cfg.beam_width, max_len=cfg.max_len, workers=workers)
    return evaluate_captions(rows, test)


def ablate_topic_counts(records: Sequence[VideoRecord], manifest: FeatureManifest,
                        ks: Sequence[int], cfg: PipelineConfig, *, stopwords=STOPWORDS,
                        workers: int = 1) -> Dict[int, dict]:
    """One evaluation report per topic count, in the order given."""
    reports = {}
    for k in ks:
        log.info("ablation: K=%d", k)
        reports[int(k)] = run_topic_pipeline(records, manifest, cfg.replace(K=int(k)),
                                             stopwords=stopwords, workers=workers)
    return reports
