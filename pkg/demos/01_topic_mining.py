#!/usr/bin/env python3
# Mine latent topics from captions with collapsed Gibbs LDA and check them
# against the topics that generated the corpus.
import numpy as np

from topicguide.corpus import Vocabulary, generate_synthetic_corpus, video_document
from topicguide.numerics import make_rng
from topicguide.topics import lda_fit, lda_infer, top_words, topic_category_cooccurrence

sc = generate_synthetic_corpus(3, 60, 100, make_rng(0))   # 3 topics, disjoint word blocks
vocab = Vocabulary(sc.words, min_count=1)
docs = [video_document(r, vocab) for r in sc.records]     # one document per video, captions pooled
print(len(docs), "documents,", sum(sum(d.values()) for d in docs), "tokens")

model = lda_fit(docs, 3, rng=make_rng(1), vocab_size=len(vocab),
                doc_ids=[r.video_id for r in sc.records])
print("alpha =", model.alpha, " eta =", model.eta)

for k in range(3):
    words = top_words(model, k, 10, vocab)
    block = max(range(3), key=lambda b: len(set(words) & set(sc.blocks[b])))
    print(f"topic {k}: {' '.join(words)}  (generating block {block})")

# every video has a category tag equal to its dominant topic
co = topic_category_cooccurrence(sc.records, model, n_categories=3)
print("topic x category (%):")
print(np.round(co["percent"], 1))

# fold-in: topic mixture of an unseen bag of words under the fitted topics
q = lda_infer({vocab.index("w0000"): 5, vocab.index("w0021"): 2}, model, rng=make_rng(2))
print("fold-in mixture:", np.round(q, 3))
