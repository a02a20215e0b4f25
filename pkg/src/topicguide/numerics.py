"""Shared numerical primitives: stable softmax, seeded sampling, ADAM and
finite-difference gradient checking.

Everything runs in float64. Random streams come from numpy's PCG64 bit
generator, whose output sequence for a given seed is fixed by its published
algorithm and is identical across platforms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np


class NumericalError(ValueError):
    """Raised when a value that must be finite is not."""


def make_rng(seed: int) -> np.random.Generator:
    """Return a PCG64 generator for a 64-bit unsigned seed."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(seed))


def check_finite(x, what: str = "value") -> None:
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite {what}")


def _floating(x) -> np.ndarray:
    # keeps extended precision inputs extended; everything else becomes float64
    x = np.asarray(x)
    return x.astype(np.result_type(x.dtype, np.float64), copy=False)


def softmax(logits, axis: int = -1) -> np.ndarray:
    """Softmax with max-subtraction along ``axis``."""
    logits = _floating(logits)
    if logits.size == 0:
        raise ValueError("softmax of an empty vector")
    check_finite(logits, "logits")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits, axis: int = -1) -> np.ndarray:
    logits = _floating(logits)
    check_finite(logits, "logits")
    shifted = logits - logits.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def sigmoid(x):
    # split by sign so exp never overflows
    x = _floating(x)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sample_categorical(probs, rng: np.random.Generator) -> int:
    """Draw index i with probability probs[i] / sum(probs).

    Uses one uniform draw and an inverse-CDF lookup, so the result is a
    deterministic function of the generator state.
    """
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("probs must be a non-empty vector")
    check_finite(p, "probabilities")
    if np.any(p < 0):
        raise ValueError("probabilities must be non-negative")
    cdf = np.cumsum(p)
    total = cdf[-1]
    if total <= 0:
        raise ValueError("probabilities sum to zero")
    u = rng.random() * total
    idx = int(np.searchsorted(cdf, u, side="right"))
    # guard against u landing on the last edge through rounding
    return min(idx, p.size - 1)


@dataclass
class AdamState:
    """First/second moments and step count for a named parameter set."""

    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState) -> None:
    """Apply one bias-corrected ADAM update to ``params`` in place.

    ``params`` and ``grads`` are dicts keyed by parameter name; a parameter
    without a gradient entry is left untouched. ``state.t`` advances by one
    per call.
    """
    for name, g in grads.items():
        if name not in params:
            raise KeyError(f"gradient for unknown parameter {name!r}")
        if params[name].shape != g.shape:
            raise ValueError(
                f"shape mismatch for {name!r}: param {params[name].shape} vs grad {g.shape}")
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    for name, g in grads.items():
        p = params[name]
        if name not in state.m:
            state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)


def numeric_gradient(loss_fn: Callable[[], float], x: np.ndarray,
                     perturbation: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``loss_fn`` w.r.t. the array ``x``.

    ``x`` is perturbed in place and restored; ``loss_fn`` takes no
    arguments and must read ``x`` through a closure. The divisor is the
    step actually stored in ``x`` after rounding, not the nominal one.
    """
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        old = flat[i]
        hi = old + perturbation
        lo = old - perturbation
        flat[i] = hi
        fp = loss_fn()
        flat[i] = lo
        fm = loss_fn()
        flat[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericalError("non-finite loss during gradient check")
        gflat[i] = (fp - fm) / (hi - lo)
    return grad


def relative_error(analytic, numeric) -> float:
    """max_i |a_i - n_i| / max(|a_i|, |n_i|, 1e-8)."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    n = np.asarray(numeric, dtype=np.float64).ravel()
    if a.size == 0:
        return 0.0
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return float(np.max(np.abs(a - n) / denom))


def gradient_check(loss_fn, params, perturbation: float = 1e-6, value_fn=None):
    """Compare analytic and central-difference gradients.

    ``loss_fn`` maps the parameters to ``(loss, grads)``. ``params`` is a
    single array or a dict of arrays (``grads`` then mirrors its structure).
    ``value_fn(params)``, if given, computes the loss for the finite
    differences instead of ``loss_fn`` (e.g. the same forward pass in
    extended precision). Returns the maximum relative error over every
    coordinate.
    """
    if value_fn is None:
        value_fn = lambda p: loss_fn(p)[0]
    if isinstance(params, np.ndarray):
        loss, grad = loss_fn(params)
        check_finite(loss, "loss")
        num = numeric_gradient(lambda: value_fn(params), params, perturbation)
        return relative_error(grad, num)

    loss, grads = loss_fn(params)
    check_finite(loss, "loss")
    worst = 0.0
    for name, p in params.items():
        if name not in grads:
            continue
        num = numeric_gradient(lambda: value_fn(params), p, perturbation)
        worst = max(worst, relative_error(grads[name], num))
    return worst
