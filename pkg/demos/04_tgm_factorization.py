#!/usr/bin/env python3
# The topic-guided LSTM composes its weights as W(z) = Wa diag(Wb z) Wc,
# a topic-weighted sum of per-topic matrices that is never materialized.
import numpy as np

from topicguide import captioner as cap
from topicguide.numerics import make_rng

rng = make_rng(0)
K = 4
p = cap.init_caption_model("tgm", feat_dim=6, vocab_size=20, n_topics=K, rng=rng, n_h=10, n_f=7)
Wa, Wb, Wc = p.weights["Wa_x"][0], p.weights["Wb_x"][0], p.weights["Wc_x"][0]   # input gate
print("factor shapes:", Wa.shape, Wb.shape, Wc.shape)

W_topic = [Wa @ np.diag(Wb[:, k]) @ Wc for k in range(K)]   # one explicit matrix per topic
z = rng.dirichlet(np.ones(K))
explicit = sum(z[k] * W_topic[k] for k in range(K))
print("max |sum_k z_k W_k - W(z)| =", np.abs(explicit - cap.tgm_compose(z, Wa, Wb, Wc)).max())

# parameters: factored vs one full matrix per topic, for all 8 LSTM maps
n_h, n_f, n_in = 512, 512, 512
full = 8 * K * n_h * n_in
factored = 8 * (n_h * n_f + n_f * K + n_f * n_in)
print(f"K={K}: explicit {full:,} vs factored {factored:,} weights")

# a one-hot topic picks out that topic's own LSTM
feats = rng.standard_normal(6)
for k in range(K):
    print("topic", k, "greedy:", cap.greedy_decode(feats, np.eye(K)[k], p, max_len=8).tokens)
