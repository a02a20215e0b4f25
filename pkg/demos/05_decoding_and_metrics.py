#!/usr/bin/env python3
# Beam search versus greedy decoding, and the three caption metrics.
import numpy as np

from topicguide import captioner as cap
from topicguide.metrics import EvalPair, bleu4, cider, evaluate_corpus, rouge_l
from topicguide.numerics import make_rng

rng = make_rng(3)
p = cap.init_caption_model("tcd", 4, 12, 3, make_rng(4), n_h=8, init_scale=1.0)
feats, z = rng.standard_normal(4), rng.dirichlet(np.ones(3))
g = cap.greedy_decode(feats, z, p)
print("greedy  ", g.tokens, round(g.log_prob, 3))
# a wider beam is not guaranteed to do better: here B=5 prunes the prefixes
# that B=2 and B=10 finish from, and runs to the 30-token limit
for B in (1, 2, 5, 10):
    h = cap.beam_search(feats, z, p, B)
    # scores are plain sums of per-step log-probabilities, recomputable
    print(f"beam {B:<3}", h.tokens, round(h.log_prob, 3),
          round(cap.hypothesis_log_prob(feats, z, p, h.tokens), 3))

refs = {"v1": ["a man is riding a horse", "a person rides a brown horse"],
        "v2": ["two dogs play in the snow", "dogs are playing outside"],
        "v3": ["a woman is slicing an onion", "someone cuts an onion"]}
hyps = {"v1": "a man rides a horse", "v2": "two dogs play in snow", "v3": "a woman cuts a potato"}
pairs = [EvalPair.from_text(v, hyps[v], refs[v]) for v in refs]
print(f"BLEU@4 {bleu4(pairs):.4f}  ROUGE-L {rouge_l(pairs):.4f}  CIDEr {cider(pairs):.4f}")
for row in evaluate_corpus(pairs)["per_video"]:
    print(row)
