#!/usr/bin/env python3
# Distil mined topic distributions into a feature-based student, then
# ensemble it with topics inferred from speech transcripts.
import numpy as np

from topicguide.corpus import Vocabulary, generate_synthetic_corpus, video_document
from topicguide.numerics import make_rng
from topicguide.predictor import (ensemble, kl_divergence, predict_general, predict_speech,
                                  train_general_predictor)
from topicguide.topics import lda_fit, teacher_distribution

sc = generate_synthetic_corpus(3, 60, 60, make_rng(20), noise=0.02)
vocab = Vocabulary(sc.words, min_count=1)
docs = [video_document(r, vocab) for r in sc.records]
teacher = lda_fit(docs, 3, iterations=300, burn_in=100, thin=10, rng=make_rng(21),
                  vocab_size=len(vocab), doc_ids=[r.video_id for r in sc.records])

train = [r for r in sc.records if r.split == "train"]
held = [r for r in sc.records if r.split != "train"]
P = {r.video_id: teacher_distribution(r, teacher) for r in sc.records}   # soft targets

student = train_general_predictor(train, P, sc.manifest, epochs=300, rng=make_rng(22), lr=3e-3, hidden=64)
Q = np.array([predict_general(r, student) for r in train])
print("train KL(teacher || student):", kl_divergence(np.array([P[r.video_id] for r in train]), Q).mean())

hits = {"general": 0, "ensemble": 0}
for i, r in enumerate(held):
    g = predict_general(r, student)
    s = predict_speech(r, teacher, vocab, rng=make_rng(100 + i))   # None without usable speech
    e = ensemble(g, s)
    truth = np.argmax(P[r.video_id])
    hits["general"] += np.argmax(g) == truth
    hits["ensemble"] += np.argmax(e.distribution) == truth
print({k: f"{v}/{len(held)}" for k, v in hits.items()}, "held-out argmax agreement")
print("sources of the last prediction:", e.sources)
