"""Finite-difference verification of every hand-written gradient.

Numeric derivatives are central differences evaluated in long double, so
the rounding noise of a float64 loss does not swamp near-zero gradient
coordinates; the analytic side is the float64 backward pass.
"""

from __future__ import annotations

from typing import Dict

import numpy as np

from . import captioner as cap
from .numerics import gradient_check
from .predictor import cross_entropy_loss, init_mlp, kl_loss, mlp_backward, mlp_logits

SMALL = dict(n_h=8, vocab=20, K=3, n_f=4, feat_dim=5)


def _extended(weights):
    return {k: v.astype(np.longdouble) for k, v in weights.items()}


def check_mlp(loss: str, rng: np.random.Generator, n: int = 6, in_dim: int = 5,
              out_dim: int = 4, hidden: int = 7, init_scale: float = 0.5) -> float:
    params = init_mlp(in_dim, out_dim, rng, hidden)
    for k in params.weights:
        params.weights[k] += rng.uniform(-init_scale, init_scale, params.weights[k].shape)
    X = rng.standard_normal((n, in_dim))
    if loss == "kl":
        target = rng.dirichlet(np.ones(out_dim), size=n)
        target[0, 0] = 0.0                      # exercise a zero teacher entry
        target[0] /= target[0].sum()
        fn = kl_loss
    else:
        target = rng.integers(0, out_dim, size=n)
        fn = cross_entropy_loss

    def loss_and_grad(w):
        logits, h = mlp_logits(w, X)
        value, dlogits = fn(target, logits)
        return value, mlp_backward(w, X, h, dlogits)

    def value(w):
        logits, _ = mlp_logits(_extended(w), X.astype(np.longdouble))
        if loss == "kl":
            logq = logits - logits.max(axis=1, keepdims=True)
            logq = logq - np.log(np.exp(logq).sum(axis=1, keepdims=True))
            safe = np.where(target > 0, target, 1.0)
            return np.mean(np.sum(np.where(target > 0, target * (np.log(safe) - logq), 0.0), axis=1))
        logq = logits - logits.max(axis=1, keepdims=True)
        logq = logq - np.log(np.exp(logq).sum(axis=1, keepdims=True))
        return -np.mean(logq[np.arange(n), target])

    return gradient_check(loss_and_grad, params.weights, value_fn=value)


def random_caption_setup(variant: str, rng: np.random.Generator, batch: int = 3,
                         init_scale: float = 0.5, **sizes):
    """A small random caption model and padded batch for gradient checks."""
    s = dict(SMALL, **sizes)
    params = cap.init_caption_model(variant, s["feat_dim"], s["vocab"], s["K"], rng,
                                    n_h=s["n_h"], n_f=s["n_f"], init_scale=init_scale,
                                    tgm_init="uniform")
    params.weights["b"] += rng.uniform(-init_scale, init_scale, params.weights["b"].shape)
    params.weights["bd"] += rng.uniform(-init_scale, init_scale, params.weights["bd"].shape)
    z = rng.dirichlet(np.ones(s["K"]), size=batch)
    lengths = rng.integers(1, 6, size=batch)
    caps = [[int(x) for x in rng.integers(2, s["vocab"], size=n)] + [cap.EOS] for n in lengths]
    return params, cap.make_batch(rng.standard_normal((batch, s["feat_dim"])), z, caps)


def check_sequence_loss(variant: str, rng: np.random.Generator) -> float:
    params, batch = random_caption_setup(variant, rng)
    return gradient_check(
        lambda w: cap.forward_backward(params, batch), params.weights,
        value_fn=lambda w: cap.forward_backward(cap.with_dtype(params, np.longdouble), batch,
                                                need_grad=False)[0])


def check_lstm_chain(rng: np.random.Generator, steps: int = 3, n_h: int = 6, n_in: int = 4) -> float:
    """Gradient of sum(h_T) w.r.t. the gate weights through chained steps."""
    w = {"Wx": rng.uniform(-0.5, 0.5, (4 * n_h, n_in)), "Wh": rng.uniform(-0.5, 0.5, (4 * n_h, n_h)),
         "b": rng.uniform(-0.5, 0.5, 4 * n_h)}
    xs = rng.standard_normal((steps, 1, n_in))
    h0 = rng.standard_normal((1, n_h)) * 0.5

    def forward(weights):
        h, c = h0.astype(weights["Wx"].dtype), np.zeros_like(h0)
        for x in xs:
            h, c = cap.lstm_step(h, c, x, weights["Wx"], weights["Wh"], weights["b"])
        return h.sum()

    def loss_and_grad(weights):
        h, c = h0.copy(), np.zeros_like(h0)
        cache = []
        for x in xs:
            a = x @ weights["Wx"].T + h @ weights["Wh"].T + weights["b"]
            h_new, c_new, gates = cap._lstm_cell(a, c, n_h)
            cache.append((x, h, c, gates))
            h, c = h_new, c_new
        g = {k: np.zeros_like(v) for k, v in weights.items()}
        dh = np.ones_like(h)
        dc = np.zeros_like(c)
        for x, h_prev, c_prev, (i, f, o, gg, tc) in reversed(cache):
            dc = dh * o * (1 - tc * tc) + dc
            da = np.concatenate([dc * gg * i * (1 - i), dc * c_prev * f * (1 - f),
                                 dh * tc * o * (1 - o), dc * i * (1 - gg * gg)], axis=1)
            g["Wx"] += da.T @ x
            g["Wh"] += da.T @ h_prev
            g["b"] += da.sum(axis=0)
            dh = da @ weights["Wh"]
            dc = dc * f
        return float(h.sum()), g

    return gradient_check(loss_and_grad, w, value_fn=lambda ws: forward(_extended(ws)))


def run_gradient_suite(rng: np.random.Generator) -> Dict[str, float]:
    """Max relative error per checked loss."""
    results = {"kl_loss": check_mlp("kl", rng), "cross_entropy": check_mlp("ce", rng),
               "lstm_chain_3_steps": check_lstm_chain(rng)}
    for v in cap.VARIANTS:
        results[f"sequence_loss[{v}]"] = check_sequence_loss(v, rng)
    return results
