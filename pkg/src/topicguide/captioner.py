"""Encoder-decoder caption models with topic guidance.

All six decoders share one LSTM core and differ only in where the topic
mixture z enters:

    vanilla   no topic
    tce       z concatenated to the video features before the encoder
    tcd       z concatenated to the word embedding at every step
    tead      word embedding + (W_z z + b_z) at every step
    temd      word embedding * (W_z z + b_z) at every step
    tgm       every LSTM weight matrix is W_a diag(W_b z) W_c

Gate layout (rows of the stacked weight matrices, blocks of n_h):

    i = sigmoid(a[0])   input gate
    f = sigmoid(a[1])   forget gate
    o = sigmoid(a[2])   output gate
    g = tanh(a[3])      candidate
    c' = f * c + i * g
    h' = o * tanh(c')

with a = W_x x + W_h h + b. The output layer is tied to the embedding:
logits = E h + b_d, so n_h must equal the embedding width.

Forward and backward passes are written out by hand over a padded batch.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .numerics import AdamState, NumericalError, adam_step, check_finite, log_softmax, sigmoid, softmax

log = logging.getLogger(__name__)

VARIANTS = ("vanilla", "tce", "tcd", "tead", "temd", "tgm")
TOPIC_VARIANTS = VARIANTS[1:]
BOS, EOS = 0, 1
MAX_LEN = 30
INIT_SCALE = 0.08


@dataclass
class CaptionModelParams:
    variant: str
    weights: Dict[str, np.ndarray]
    feat_dim: int
    n_topics: int
    vocab_size: int
    n_h: int
    n_f: int = 0

    @property
    def n_in(self) -> int:
        return self.n_h + (self.n_topics if self.variant == "tcd" else 0)

    @property
    def output_weights(self) -> np.ndarray:
        """W_d; the same storage as the embedding, so tying cannot drift."""
        return self.weights["E"]

    def copy(self) -> "CaptionModelParams":
        return CaptionModelParams(self.variant, {k: v.copy() for k, v in self.weights.items()},
                                  self.feat_dim, self.n_topics, self.vocab_size, self.n_h, self.n_f)

    def config(self) -> dict:
        return {"variant": self.variant, "feat_dim": self.feat_dim, "n_topics": self.n_topics,
                "vocab_size": self.vocab_size, "n_h": self.n_h, "n_f": self.n_f}


def init_caption_model(variant: str, feat_dim: int, vocab_size: int, n_topics: int,
                       rng: np.random.Generator, *, n_h: int = 512, n_f: int = 512,
                       init_scale: float = INIT_SCALE, forget_bias: float = 1.0,
                       tgm_init: str = "equal") -> CaptionModelParams:
    """Uniform(-init_scale, init_scale) weights, zero biases except the
    forget gate, which starts at ``forget_bias``.

    TGM factors are initialized so that W_a diag(W_b z) W_c has the entry
    scale of an ordinary U(-init_scale, init_scale) matrix. The default
    ``tgm_init="equal"`` draws all three factors from one zero-mean
    uniform, which gives them equal magnitudes and hence comparable
    effective ADAM step sizes; each topic starts with an independent matrix.
    ``"balanced"`` uses W_b = 1 + noise (topics start nearly shared, and the
    topic-specific part learns slowly and training is less stable at high
    learning rates). ``"uniform"`` draws every factor from
    U(-init_scale, init_scale), which composes to weights about
    sqrt(n_f) * init_scale^2 in scale and trains very slowly.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    u = lambda *shape: rng.uniform(-init_scale, init_scale, size=shape)
    K = n_topics
    enc_in = feat_dim + (K if variant == "tce" else 0)
    n_in = n_h + (K if variant == "tcd" else 0)
    b = np.zeros(4 * n_h)
    b[n_h:2 * n_h] = forget_bias
    w = {"We": u(n_h, enc_in), "be": np.zeros(n_h), "E": u(vocab_size, n_h),
         "bd": np.zeros(vocab_size), "b": b}
    if variant == "tgm":
        if tgm_init == "uniform":
            ua = uc = u
            ub = u
        elif tgm_init == "balanced":
            # Var(sum_f a b c) = n_f Var(a) Var(c) for b ~ 1; match Var(U(-s, s)) = s^2 / 3
            s = np.sqrt(init_scale * np.sqrt(3.0 / n_f))
            ua = uc = lambda *shape: rng.uniform(-s, s, size=shape)
            ub = lambda *shape: 1.0 + u(*shape)
        elif tgm_init == "equal":
            # all three factors U(-m, m) with n_f (m^2 / 3)^3 = init_scale^2 / 3
            m = np.sqrt(3.0 * (init_scale ** 2 / (3.0 * n_f)) ** (1.0 / 3.0))
            ua = ub = uc = lambda *shape: rng.uniform(-m, m, size=shape)
        else:
            raise ValueError(f"unknown tgm_init {tgm_init!r}")
        w.update({"Wa_x": ua(4, n_h, n_f), "Wb_x": ub(4, n_f, K), "Wc_x": uc(4, n_f, n_in),
                  "Wa_h": ua(4, n_h, n_f), "Wb_h": ub(4, n_f, K), "Wc_h": uc(4, n_f, n_h)})
    else:
        w.update({"Wx": u(4 * n_h, n_in), "Wh": u(4 * n_h, n_h)})
    if variant in ("tead", "temd"):
        w.update({"Wz": u(n_h, K), "bz": np.zeros(n_h)})
    return CaptionModelParams(variant, w, feat_dim, K, vocab_size, n_h, n_f if variant == "tgm" else 0)


# ---------------------------------------------------------------------------
# single-example building blocks

def encode(features: np.ndarray, params: CaptionModelParams,
           z: Optional[np.ndarray] = None) -> np.ndarray:
    """x = W_e [m_1; ...; m_N] + b_e, with z appended to the stack for TCE."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape[-1] != params.feat_dim:
        raise ValueError(f"feature width {features.shape[-1]} != model feat_dim {params.feat_dim}")
    inp = features
    if params.variant == "tce":
        if z is None:
            raise ValueError("tce needs a topic distribution")
        inp = np.concatenate([features, np.asarray(z, dtype=np.float64)], axis=-1)
    return inp @ params.weights["We"].T + params.weights["be"]


def lstm_step(h, c, x, Wx, Wh, b):
    """One LSTM update with the gate layout documented at module level."""
    n_h = h.shape[-1]
    a = x @ Wx.T + h @ Wh.T + b
    i = sigmoid(a[..., :n_h])
    f = sigmoid(a[..., n_h:2 * n_h])
    o = sigmoid(a[..., 2 * n_h:3 * n_h])
    g = np.tanh(a[..., 3 * n_h:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    check_finite(h_new, "LSTM state")
    return h_new, c_new


def topic_embedding(z, params: CaptionModelParams) -> np.ndarray:
    return np.asarray(z, dtype=np.float64) @ params.weights["Wz"].T + params.weights["bz"]


def decoder_input(variant: str, w_prev: np.ndarray, z, params: Optional[CaptionModelParams] = None,
                  z_emb: Optional[np.ndarray] = None) -> np.ndarray:
    """Step input built from the previous word embedding and the topic."""
    if variant in ("vanilla", "tce", "tgm"):
        return w_prev
    if variant == "tcd":
        z = np.broadcast_to(np.asarray(z, dtype=np.float64), w_prev.shape[:-1] + (np.shape(z)[-1],))
        return np.concatenate([w_prev, z], axis=-1)
    if z_emb is None:
        z_emb = topic_embedding(z, params)
    if variant == "tead":
        return w_prev + z_emb
    if variant == "temd":
        return w_prev * z_emb
    raise ValueError(f"unknown variant {variant!r}")


def tgm_compose(z, Wa: np.ndarray, Wb: np.ndarray, Wc: np.ndarray) -> np.ndarray:
    """W(z) = W_a diag(W_b z) W_c for shapes (n_h, n_f), (n_f, K), (n_f, n_in)."""
    z = np.asarray(z, dtype=np.float64)
    if Wa.ndim != 2 or Wb.ndim != 2 or Wc.ndim != 2:
        raise ValueError("tgm_compose expects 2-d factor matrices")
    n_f = Wa.shape[1]
    if Wb.shape != (n_f, z.shape[0]) or Wc.shape[0] != n_f:
        raise ValueError(f"incompatible factor shapes {Wa.shape}, {Wb.shape}, {Wc.shape} "
                         f"for K={z.shape[0]}")
    return (Wa * (Wb @ z)) @ Wc


def composed_lstm_weights(params: CaptionModelParams, z) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked (4 n_h x n_in) and (4 n_h x n_h) matrices a TGM decoder uses for z."""
    w = params.weights
    Wx = np.concatenate([tgm_compose(z, w["Wa_x"][g], w["Wb_x"][g], w["Wc_x"][g]) for g in range(4)])
    Wh = np.concatenate([tgm_compose(z, w["Wa_h"][g], w["Wb_h"][g], w["Wc_h"][g]) for g in range(4)])
    return Wx, Wh


def step_probabilities(h: np.ndarray, params: CaptionModelParams) -> np.ndarray:
    return softmax(h @ params.weights["E"].T + params.weights["bd"])


# ---------------------------------------------------------------------------
# batched machinery shared by training and decoding

@dataclass
class _Context:
    """Per-row quantities that stay fixed across decoding steps."""
    z: np.ndarray                    # B x K
    enc_in: np.ndarray               # B x encoder input width
    h0: np.ndarray                   # B x n_h
    z_emb: Optional[np.ndarray] = None      # B x n_h (tead/temd)
    sx: Optional[np.ndarray] = None         # 4 x B x n_f (tgm)
    sh: Optional[np.ndarray] = None

    def take(self, idx) -> "_Context":
        pick = lambda a, ax=0: None if a is None else np.take(a, idx, axis=ax)
        return _Context(pick(self.z), pick(self.enc_in), pick(self.h0), pick(self.z_emb),
                        pick(self.sx, 1), pick(self.sh, 1))


def _context(params: CaptionModelParams, feats: np.ndarray, z: np.ndarray) -> _Context:
    w = params.weights
    feats = np.atleast_2d(np.asarray(feats, dtype=np.float64))
    if z is None:
        z = np.zeros((feats.shape[0], params.n_topics))
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if feats.shape[1] != params.feat_dim:
        raise ValueError(f"feature width {feats.shape[1]} != model feat_dim {params.feat_dim}")
    if z.shape[1] != params.n_topics:
        raise ValueError(f"topic width {z.shape[1]} != model K {params.n_topics}")
    enc_in = np.concatenate([feats, z], axis=1) if params.variant == "tce" else feats
    ctx = _Context(z=z, enc_in=enc_in, h0=enc_in @ w["We"].T + w["be"])
    if params.variant in ("tead", "temd"):
        ctx.z_emb = z @ w["Wz"].T + w["bz"]
    if params.variant == "tgm":
        ctx.sx = np.einsum("bk,gfk->gbf", z, w["Wb_x"])
        ctx.sh = np.einsum("bk,gfk->gbf", z, w["Wb_h"])
    return ctx


def _step_input(params, ctx: _Context, w_emb):
    v = params.variant
    if v == "tcd":
        return np.concatenate([w_emb, ctx.z], axis=1)
    if v == "tead":
        return w_emb + ctx.z_emb
    if v == "temd":
        return w_emb * ctx.z_emb
    return w_emb


def _factored(x, Wc, s, Wa):
    """Rows of x through W_a diag(s) W_c for each of the 4 gates.

    x: B x n_in, Wc: 4 x n_f x n_in, s: 4 x B x n_f, Wa: 4 x n_h x n_f.
    Returns the B x 4 n_h pre-activation plus the intermediates for backprop.
    """
    u = np.matmul(x[None], Wc.transpose(0, 2, 1))        # 4 x B x n_f
    us = u * s
    a = np.matmul(us, Wa.transpose(0, 2, 1))             # 4 x B x n_h
    return a.transpose(1, 0, 2).reshape(x.shape[0], -1), u, us


def _preactivation(params, ctx: _Context, x, h):
    w = params.weights
    if params.variant == "tgm":
        ax, ux, usx = _factored(x, w["Wc_x"], ctx.sx, w["Wa_x"])
        ah, uh, ush = _factored(h, w["Wc_h"], ctx.sh, w["Wa_h"])
        return ax + ah + w["b"], (ux, usx, uh, ush)
    return x @ w["Wx"].T + h @ w["Wh"].T + w["b"], None


def _lstm_cell(a, c, n_h):
    i = sigmoid(a[:, :n_h])
    f = sigmoid(a[:, n_h:2 * n_h])
    o = sigmoid(a[:, 2 * n_h:3 * n_h])
    g = np.tanh(a[:, 3 * n_h:])
    c_new = f * c + i * g
    tc = np.tanh(c_new)
    return o * tc, c_new, (i, f, o, g, tc)


def _advance(params, ctx: _Context, prev_tokens, h, c):
    """One decoding step without dropout; returns (h, c, log-probs)."""
    x = _step_input(params, ctx, params.weights["E"][prev_tokens])
    a, _ = _preactivation(params, ctx, x, h)
    h, c, _ = _lstm_cell(a, c, params.n_h)
    check_finite(h, "decoder state")
    return h, c, log_softmax(h @ params.weights["E"].T + params.weights["bd"], axis=1)


@dataclass
class Batch:
    feats: np.ndarray      # B x F
    topics: np.ndarray     # B x K
    inputs: np.ndarray     # B x T, BOS-prefixed
    targets: np.ndarray    # B x T, EOS-terminated
    mask: np.ndarray       # B x T

    @property
    def n_tokens(self) -> int:
        return int(self.mask.sum())


def make_batch(feats, topics, captions: Sequence[Sequence[int]]) -> Batch:
    """Pad EOS-terminated id sequences into teacher-forcing arrays."""
    if any(len(c) == 0 for c in captions):
        raise ValueError("empty caption")
    B = len(captions)
    T = max(len(c) for c in captions)
    inputs = np.full((B, T), EOS, dtype=np.int64)
    targets = np.full((B, T), EOS, dtype=np.int64)
    mask = np.zeros((B, T))
    for r, cap in enumerate(captions):
        n = len(cap)
        targets[r, :n] = cap
        inputs[r, 0] = BOS
        inputs[r, 1:n] = cap[:-1]
        mask[r, :n] = 1.0
    return Batch(np.atleast_2d(np.asarray(feats, dtype=np.float64)),
                 np.atleast_2d(np.asarray(topics, dtype=np.float64)), inputs, targets, mask)


def _dropout_mask(rng, shape, rate):
    if rate <= 0.0 or rng is None:
        return None
    return (rng.random(shape) >= rate) / (1.0 - rate)


def forward_backward(params: CaptionModelParams, batch: Batch, *, dropout: float = 0.0,
                     rng: Optional[np.random.Generator] = None, need_grad: bool = True):
    """Summed negative log-likelihood of a batch and its gradient.

    Dropout (inverted, rate ``dropout``) is applied to the step input and to
    h_t before the output projection when ``rng`` is given. The forward pass
    runs in the weights' dtype, so long-double weights give a long-double
    loss (used by the gradient checks).
    """
    w = params.weights
    n_h, V = params.n_h, params.vocab_size
    B, T = batch.inputs.shape
    ctx = _context(params, batch.feats, batch.topics)
    E = w["E"]
    h, c = ctx.h0, np.zeros((B, n_h))
    steps = []
    loss = 0.0
    rows = np.arange(B)
    for t in range(T):
        w_emb = E[batch.inputs[:, t]]
        x = _step_input(params, ctx, w_emb)
        mx = _dropout_mask(rng, x.shape, dropout)
        xd = x if mx is None else x * mx
        a, fac = _preactivation(params, ctx, xd, h)
        h_new, c_new, gates = _lstm_cell(a, c, n_h)
        mh = _dropout_mask(rng, h_new.shape, dropout)
        hd = h_new if mh is None else h_new * mh
        logp = log_softmax(hd @ E.T + w["bd"], axis=1)
        loss = loss - (logp[rows, batch.targets[:, t]] * batch.mask[:, t]).sum()
        if need_grad:
            steps.append((w_emb, xd, mx, h, c, fac, gates, c_new, mh, hd, logp))
        h, c = h_new, c_new
    if not np.isfinite(loss):
        raise NumericalError("non-finite caption loss")
    if not need_grad:
        return loss, None
    loss = float(loss)

    g = {k: np.zeros_like(v) for k, v in w.items()}
    dh_next = np.zeros((B, n_h))
    dc_next = np.zeros((B, n_h))
    dz_emb = np.zeros((B, n_h)) if params.variant in ("tead", "temd") else None
    if params.variant == "tgm":
        dsx = np.zeros_like(ctx.sx)
        dsh = np.zeros_like(ctx.sh)
    for t in reversed(range(T)):
        w_emb, xd, mx, h_prev, c_prev, fac, (i, f, o, gg, tc), c_new, mh, hd, logp = steps[t]
        dlogits = np.exp(logp)
        dlogits[rows, batch.targets[:, t]] -= 1.0
        dlogits *= batch.mask[:, t:t + 1]
        g["E"] += dlogits.T @ hd
        g["bd"] += dlogits.sum(axis=0)
        dhd = dlogits @ E
        dh = (dhd if mh is None else dhd * mh) + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        da = np.concatenate([dc * gg * i * (1.0 - i),
                             dc * c_prev * f * (1.0 - f),
                             dh * tc * o * (1.0 - o),
                             dc * i * (1.0 - gg * gg)], axis=1)
        dc_next = dc * f
        g["b"] += da.sum(axis=0)
        if params.variant == "tgm":
            ux, usx, uh, ush = fac
            da3 = da.reshape(B, 4, n_h).transpose(1, 0, 2)          # 4 x B x n_h
            dxd, ds = _factored_backward(da3, xd, ux, usx, ctx.sx, w["Wa_x"], w["Wc_x"],
                                         g["Wa_x"], g["Wc_x"])
            dsx += ds
            dh_next, ds = _factored_backward(da3, h_prev, uh, ush, ctx.sh, w["Wa_h"], w["Wc_h"],
                                             g["Wa_h"], g["Wc_h"])
            dsh += ds
        else:
            g["Wx"] += da.T @ xd
            g["Wh"] += da.T @ h_prev
            dxd = da @ w["Wx"]
            dh_next = da @ w["Wh"]
        dx = dxd if mx is None else dxd * mx
        v = params.variant
        if v == "tcd":
            dw = dx[:, :n_h]
        elif v == "tead":
            dw = dx
            dz_emb += dx
        elif v == "temd":
            dw = dx * ctx.z_emb
            dz_emb += dx * w_emb
        else:
            dw = dx
        np.add.at(g["E"], batch.inputs[:, t], dw)

    g["We"] += dh_next.T @ ctx.enc_in
    g["be"] += dh_next.sum(axis=0)
    if dz_emb is not None:
        g["Wz"] += dz_emb.T @ ctx.z
        g["bz"] += dz_emb.sum(axis=0)
    if params.variant == "tgm":
        g["Wb_x"] += np.einsum("gbf,bk->gfk", dsx, ctx.z)
        g["Wb_h"] += np.einsum("gbf,bk->gfk", dsh, ctx.z)
    return loss, g


def with_dtype(params: CaptionModelParams, dtype) -> CaptionModelParams:
    out = params.copy()
    out.weights = {k: v.astype(dtype) for k, v in params.weights.items()}
    return out


def _factored_backward(da3, x, u, us, s, Wa, Wc, gWa, gWc):
    dus = np.matmul(da3, Wa)                                 # 4 x B x n_f
    gWa += np.matmul(da3.transpose(0, 2, 1), us)             # 4 x n_h x n_f
    du = dus * s
    ds = dus * u
    gWc += np.matmul(du.transpose(0, 2, 1), x[None])         # 4 x n_f x n_in
    dx = np.matmul(du, Wc).sum(axis=0)                       # B x n_in
    return dx, ds


def sequence_loss(features, caption_ids: Sequence[int], z, params: CaptionModelParams, *,
                  dropout: float = 0.0, rng: Optional[np.random.Generator] = None) -> float:
    """-sum_t log Pr(w_t | x, w_<t) for one EOS-terminated caption."""
    if len(caption_ids) == 0:
        raise ValueError("empty caption")
    if z is None:
        z = np.zeros(params.n_topics)
    batch = make_batch(np.atleast_2d(features), np.atleast_2d(z), [list(caption_ids)])
    loss, _ = forward_backward(params, batch, dropout=dropout, rng=rng, need_grad=False)
    return loss


def step_distributions(features, caption_ids: Sequence[int], z, params: CaptionModelParams) -> np.ndarray:
    """Teacher-forced per-step word distributions (T x V), evaluation mode."""
    if z is None:
        z = np.zeros(params.n_topics)
    ctx = _context(params, features, z)
    h, c = ctx.h0, np.zeros((1, params.n_h))
    prev = BOS
    out = []
    for tok in caption_ids:
        h, c, logp = _advance(params, ctx, np.array([prev]), h, c)
        out.append(np.exp(logp[0]))
        prev = tok
    return np.array(out)


# ---------------------------------------------------------------------------
# training

@dataclass
class CaptionData:
    """Aligned (video, caption) training pairs."""
    feats: np.ndarray                # N_videos x F
    topics: np.ndarray               # N_videos x K
    pairs: List[Tuple[int, List[int]]] = field(default_factory=list)   # (video row, ids)

    def batch(self, idx) -> Batch:
        rows = [self.pairs[i][0] for i in idx]
        return make_batch(self.feats[rows], self.topics[rows], [self.pairs[i][1] for i in idx])


def train_captioner(params: CaptionModelParams, data: CaptionData, *, epochs: int,
                    rng: np.random.Generator, batch_size: int = 64, lr: float = 1e-4,
                    dropout: float = 0.5, state: Optional[AdamState] = None,
                    callback=None) -> List[float]:
    """Minimize the mean per-caption NLL with ADAM; returns per-epoch mean loss.

    Gradients are averaged over the captions in each batch. Pairs are
    reshuffled every epoch from ``rng``.
    """
    state = state or AdamState(lr=lr)
    n = len(data.pairs)
    if n == 0:
        raise ValueError("no training pairs")
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            loss, grads = forward_backward(params, data.batch(idx), dropout=dropout, rng=rng)
            scale = 1.0 / len(idx)
            for v in grads.values():
                v *= scale
            adam_step(params.weights, grads, state)
            total += loss
        history.append(total / n)
        if not np.isfinite(history[-1]):
            raise NumericalError(f"caption training diverged at epoch {epoch}")
        if callback is not None:
            callback(epoch, history[-1])
    return history


def perplexity(params: CaptionModelParams, data: CaptionData, batch_size: int = 256) -> float:
    """exp(total NLL / total predicted tokens), no dropout."""
    nll, tokens = 0.0, 0
    for start in range(0, len(data.pairs), batch_size):
        batch = data.batch(range(start, min(start + batch_size, len(data.pairs))))
        loss, _ = forward_backward(params, batch, need_grad=False)
        nll += loss
        tokens += batch.n_tokens
    if tokens == 0:
        raise ValueError("no tokens to score")
    return float(np.exp(nll / tokens))


# ---------------------------------------------------------------------------
# decoding

@dataclass
class Hypothesis:
    tokens: Tuple[int, ...]
    log_prob: float
    finished: bool = False


def greedy_decode(features, z, params: CaptionModelParams, max_len: int = MAX_LEN) -> Hypothesis:
    """Argmax decoding (lowest id among exact ties)."""
    ctx = _context(params, features, z)
    h, c = ctx.h0, np.zeros((1, params.n_h))
    prev, tokens, total = BOS, [], 0.0
    for _ in range(max_len):
        h, c, logp = _advance(params, ctx, np.array([prev]), h, c)
        prev = int(np.argmax(logp[0]))
        tokens.append(prev)
        total += float(logp[0, prev])
        if prev == EOS:
            break
    return Hypothesis(tuple(tokens), total, True)


def beam_search(features, z, params: CaptionModelParams, beam_width: int = 5,
                max_len: int = MAX_LEN) -> Hypothesis:
    """Beam search without length normalization.

    Each live hypothesis proposes its ``beam_width`` best continuations; the
    ``beam_width`` best candidates overall survive, ranked by total
    log-probability with ties going to the lexicographically smaller token
    sequence. Candidates ending in EOS or reaching ``max_len`` tokens are
    finished. The search stops once no live hypothesis can beat the best
    finished one, since extending a hypothesis never raises its score.
    """
    if beam_width < 1:
        raise ValueError("beam width must be at least 1")
    ctx1 = _context(params, features, z)
    V = params.vocab_size
    k = min(beam_width, V)
    live = [Hypothesis((), 0.0)]
    states_h, states_c = ctx1.h0, np.zeros((1, params.n_h))
    finished: List[Hypothesis] = []
    for step in range(max_len):
        ctx = ctx1.take(np.zeros(len(live), dtype=np.int64))
        prev = np.array([hyp.tokens[-1] if hyp.tokens else BOS for hyp in live])
        h, c, logp = _advance(params, ctx, prev, states_h, states_c)
        cands = []
        for r, hyp in enumerate(live):
            # top-k by (-logp, token id)
            order = np.lexsort((np.arange(V), -logp[r]))[:k]
            for tok in order:
                cands.append((hyp.log_prob + float(logp[r, tok]), hyp.tokens + (int(tok),), r))
        cands.sort(key=lambda cand: (-cand[0], cand[1]))
        new_live, rows = [], []
        for score, tokens, r in cands[:beam_width]:
            done = tokens[-1] == EOS or len(tokens) >= max_len
            hyp = Hypothesis(tokens, score, done)
            if done:
                finished.append(hyp)
            else:
                new_live.append(hyp)
                rows.append(r)
        live = new_live
        if not live:
            break
        best_done = max((f.log_prob for f in finished), default=-np.inf)
        if best_done >= max(hyp.log_prob for hyp in live):
            break
        states_h, states_c = h[rows], c[rows]
    return min(finished, key=lambda hyp: (-hyp.log_prob, hyp.tokens))


def hypothesis_log_prob(features, z, params: CaptionModelParams, tokens: Sequence[int]) -> float:
    """Recompute the total log-probability of a token sequence."""
    dists = step_distributions(features, tokens, z, params)
    return float(sum(np.log(dists[t, tok]) for t, tok in enumerate(tokens)))


def strip_eos(tokens: Sequence[int]) -> List[int]:
    return [t for t in tokens if t != EOS]
