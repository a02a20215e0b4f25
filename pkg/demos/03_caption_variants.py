#!/usr/bin/env python3
# Train the six decoders on a corpus whose word order depends on a latent
# topic and compare beam-search captions on held-out videos. One seed and a
# short budget: the order among the topic-guided variants moves with both.
import numpy as np

from topicguide import captioner as cap
from topicguide.corpus import build_vocabulary, caption_ids, generate_styled_corpus, tokenize
from topicguide.metrics import EvalPair, cider
from topicguide.numerics import make_rng
from topicguide.predictor import feature_matrix

sc = generate_styled_corpus(4, 6, 3, make_rng(0), n_slots=5, word_source="object")
print(sc.records[0].captions[:3])

train = [(i, r) for i, r in enumerate(sc.records) if r.split == "train"]
test = [(i, r) for i, r in enumerate(sc.records) if r.split == "test"]
vocab = build_vocabulary([r for _, r in train])
F = feature_matrix(sc.records, sc.manifest)
rows = [i for i, _ in train]
data = cap.CaptionData(F[rows], sc.mixtures[rows],
                       [(j, caption_ids(c, vocab)) for j, (_, r) in enumerate(train) for c in r.captions])
print(len(data.pairs), "training pairs, vocabulary", len(vocab))

for variant in cap.VARIANTS:
    p = cap.init_caption_model(variant, F.shape[1], len(vocab), 4, make_rng(1), n_h=32, n_f=32)
    cap.train_captioner(p, data, epochs=20, rng=make_rng(2), lr=5e-3, dropout=0.0)
    pairs = []
    for i, r in test:
        hyp = cap.beam_search(F[i], sc.mixtures[i], p, 5)
        pairs.append(EvalPair(r.video_id, tuple(vocab.decode(hyp.tokens)),
                              tuple(tuple(tokenize(c)) for c in r.captions)))
    print(f"{variant:<8} CIDEr {cider(pairs):.3f}   e.g. {' '.join(pairs[0].hypothesis)}")
