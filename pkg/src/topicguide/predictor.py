"""Topic prediction for unseen videos.

A one-hidden-layer tanh network is distilled from the LDA teacher with a KL
loss on the concatenated multimodal features; a second predictor folds the
cleaned speech transcript into the fitted LDA model; the two are averaged
over whichever is available. The same network shape trained with
cross-entropy predicts the predefined category tags.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence

import numpy as np

from .corpus import FeatureManifest, STOPWORDS, VideoRecord, clean_speech, to_bag_of_words
from .numerics import AdamState, NumericalError, adam_step, softmax
from .topics import TopicModel, lda_infer

log = logging.getLogger(__name__)

HIDDEN = 512
INIT_SCALE = 0.08
LOG_FLOOR = 1e-12


def assemble_features(video: VideoRecord, manifest: FeatureManifest) -> np.ndarray:
    """Concatenate modalities in manifest order, zero-filling absent ones."""
    parts = []
    for name, dim in manifest.entries:
        vec = video.features.get(name)
        if vec is None:
            parts.append(np.zeros(dim))
            continue
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (dim,):
            raise ValueError(f"{video.video_id}: modality {name!r} has shape {vec.shape}, "
                             f"expected ({dim},)")
        parts.append(vec)
    return np.concatenate(parts) if parts else np.zeros(0)


def feature_matrix(records: Sequence[VideoRecord], manifest: FeatureManifest) -> np.ndarray:
    return np.stack([assemble_features(r, manifest) for r in records])


@dataclass
class MlpParams:
    weights: Dict[str, np.ndarray]   # W1 (H x D), b1 (H), W2 (O x H), b2 (O)
    manifest: Optional[FeatureManifest] = None

    @property
    def in_dim(self):
        return self.weights["W1"].shape[1]

    @property
    def out_dim(self):
        return self.weights["W2"].shape[0]


def init_mlp(in_dim: int, out_dim: int, rng: np.random.Generator,
             hidden: int = HIDDEN, manifest: Optional[FeatureManifest] = None) -> MlpParams:
    u = lambda *shape: rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
    return MlpParams({"W1": u(hidden, in_dim), "b1": np.zeros(hidden),
                      "W2": u(out_dim, hidden), "b2": np.zeros(out_dim)}, manifest)


def mlp_logits(weights: Mapping[str, np.ndarray], X: np.ndarray):
    h = np.tanh(X @ weights["W1"].T + weights["b1"])
    return h @ weights["W2"].T + weights["b2"], h


def mlp_backward(weights, X, h, dlogits) -> Dict[str, np.ndarray]:
    dh = dlogits @ weights["W2"]
    da = dh * (1.0 - h * h)
    return {"W2": dlogits.T @ h, "b2": dlogits.sum(axis=0),
            "W1": da.T @ X, "b1": da.sum(axis=0)}


def kl_divergence(P, Q) -> np.ndarray:
    """Row-wise KL(P || Q); terms with P_k = 0 contribute nothing."""
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    Q = np.atleast_2d(np.asarray(Q, dtype=np.float64))
    terms = np.where(P > 0, P * (np.log(np.where(P > 0, P, 1.0)) - np.log(np.maximum(Q, LOG_FLOOR))), 0.0)
    return terms.sum(axis=1)


def kl_loss(P: np.ndarray, logits: np.ndarray):
    """Mean KL(P_i || softmax(logits_i)) and its gradient w.r.t. the logits."""
    Q = softmax(logits, axis=1)
    loss = float(kl_divergence(P, Q).mean())
    # d/dlogits sum_k P_k log(P_k/Q_k) = Q * sum(P) - P
    dlogits = (Q * P.sum(axis=1, keepdims=True) - P) / P.shape[0]
    return loss, dlogits


def cross_entropy_loss(labels: np.ndarray, logits: np.ndarray):
    Q = softmax(logits, axis=1)
    n = labels.shape[0]
    loss = float(-np.log(np.maximum(Q[np.arange(n), labels], LOG_FLOOR)).mean())
    dlogits = Q.copy()
    dlogits[np.arange(n), labels] -= 1.0
    return loss, dlogits / n


def _train(params: MlpParams, X, loss_fn, targets, epochs, rng, lr, batch_size, what):
    state = AdamState(lr=lr)
    n = X.shape[0]
    history = []
    for epoch in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            logits, h = mlp_logits(params.weights, X[idx])
            loss, dlogits = loss_fn(targets[idx], logits)
            if not np.isfinite(loss):
                raise NumericalError(f"{what}: non-finite loss at epoch {epoch}")
            adam_step(params.weights, mlp_backward(params.weights, X[idx], h, dlogits), state)
            total += loss * len(idx)
        history.append(total / n)
        log.debug("%s epoch %d loss %.6f", what, epoch, history[-1])
    return history


def train_general_predictor(records: Sequence[VideoRecord], teachers, manifest: FeatureManifest,
                            *, epochs: int = 100, rng: np.random.Generator, lr: float = 1e-4,
                            batch_size: int = 64, hidden: int = HIDDEN,
                            params: Optional[MlpParams] = None) -> MlpParams:
    """Distill teacher topic distributions into a feature-based student.

    ``teachers`` is an (N x K) array aligned with ``records`` or a mapping
    from video id to distribution. Minimizes mean KL(teacher || student)
    with ADAM.
    """
    if isinstance(teachers, Mapping):
        missing = [r.video_id for r in records if r.video_id not in teachers]
        if missing:
            raise ValueError(f"no teacher distribution for {len(missing)} videos, e.g. {missing[0]}")
        P = np.stack([np.asarray(teachers[r.video_id], dtype=np.float64) for r in records])
    else:
        P = np.asarray(teachers, dtype=np.float64)
        if P.shape[0] != len(records):
            raise ValueError("teacher distributions not aligned with records")
    X = feature_matrix(records, manifest)
    if params is None:
        params = init_mlp(X.shape[1], P.shape[1], rng, hidden, manifest)
    params.manifest = manifest
    _train(params, X, kl_loss, P, epochs, rng, lr, batch_size, "general predictor")
    return params


def predict_general(video: VideoRecord, params: MlpParams,
                    manifest: Optional[FeatureManifest] = None) -> np.ndarray:
    x = assemble_features(video, manifest or params.manifest)
    logits, _ = mlp_logits(params.weights, x[None, :])
    return softmax(logits[0])


def predict_speech(video: VideoRecord, model: TopicModel, vocab, *,
                   rng: np.random.Generator, stopwords=STOPWORDS,
                   iterations: int = 200) -> Optional[np.ndarray]:
    """Fold the cleaned transcript into the topic model; None without usable speech."""
    tokens = clean_speech(video.speech, vocab)
    if tokens is None:
        return None
    return lda_infer(to_bag_of_words(tokens, vocab, stopwords), model,
                     iterations=iterations, rng=rng)


@dataclass
class TopicPrediction:
    distribution: np.ndarray
    sources: tuple


def ensemble(general: np.ndarray, speech: Optional[np.ndarray] = None) -> TopicPrediction:
    """Equal-weight average of the available predictions."""
    general = np.asarray(general, dtype=np.float64)
    if speech is None:
        return TopicPrediction(general.copy(), ("general",))
    return TopicPrediction((general + np.asarray(speech, dtype=np.float64)) / 2.0,
                           ("general", "speech"))


def train_category_classifier(records: Sequence[VideoRecord], manifest: FeatureManifest, *,
                              n_categories: int = 20, epochs: int = 100,
                              rng: np.random.Generator, lr: float = 1e-4,
                              batch_size: int = 64, hidden: int = HIDDEN) -> MlpParams:
    missing = [r.video_id for r in records if r.category is None]
    if missing:
        raise ValueError(f"{len(missing)} training videos lack a category label, e.g. {missing[0]}")
    labels = np.asarray([r.category for r in records], dtype=np.int64)
    X = feature_matrix(records, manifest)
    params = init_mlp(X.shape[1], n_categories, rng, hidden, manifest)
    _train(params, X, cross_entropy_loss, labels, epochs, rng, lr, batch_size, "category classifier")
    return params


def predict_category(video: VideoRecord, params: MlpParams, one_hot: bool = False) -> np.ndarray:
    """Category distribution, or its argmax as a one-hot vector."""
    q = predict_general(video, params)
    if one_hot:
        out = np.zeros_like(q)
        out[int(np.argmax(q))] = 1.0
        return out
    return q


def save_predictions(predictions: Mapping[str, TopicPrediction], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for vid, pred in predictions.items():
            f.write(json.dumps({"video_id": vid, "topics": [float(x) for x in pred.distribution],
                                "sources": list(pred.sources)}) + "\n")


def load_predictions(path) -> Dict[str, TopicPrediction]:
    out = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                obj = json.loads(line)
                out[obj["video_id"]] = TopicPrediction(np.asarray(obj["topics"], dtype=np.float64),
                                                       tuple(obj.get("sources", ("annotated",))))
    return out
