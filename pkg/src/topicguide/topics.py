"""LDA topic mining by collapsed Gibbs sampling, fold-in inference for new
documents, and topic summaries."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


@njit(cache=True)
def _gibbs_sweep(docs, words, z, ndk, nkw, nk, alpha, eta, uniforms):
    K, V = nkw.shape
    p = np.empty(K)
    veta = V * eta
    for i in range(words.shape[0]):
        d = docs[i]
        w = words[i]
        k = z[i]
        ndk[d, k] -= 1
        nkw[k, w] -= 1
        nk[k] -= 1
        total = 0.0
        for j in range(K):
            total += (ndk[d, j] + alpha) * (nkw[j, w] + eta) / (nk[j] + veta)
            p[j] = total
        u = uniforms[i] * total
        k = 0
        while k < K - 1 and p[k] <= u:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nkw[k, w] += 1
        nk[k] += 1


@njit(cache=True)
def _foldin_sweep(words, z, nk_doc, beta_t, alpha, uniforms):
    # beta_t is V x K so each token reads one contiguous row
    K = nk_doc.shape[0]
    p = np.empty(K)
    for i in range(words.shape[0]):
        w = words[i]
        nk_doc[z[i]] -= 1
        total = 0.0
        for j in range(K):
            total += (nk_doc[j] + alpha) * beta_t[w, j]
            p[j] = total
        u = uniforms[i] * total
        k = 0
        while k < K - 1 and p[k] <= u:
            k += 1
        z[i] = k
        nk_doc[k] += 1


@dataclass
class TopicModel:
    """Fitted LDA state.

    ``beta`` and ``theta`` are posterior means averaged over the retained
    Gibbs samples; the count matrices and ``assignments`` hold the final
    sampler state.
    """

    K: int
    alpha: float
    eta: float
    beta: np.ndarray                  # K x V
    theta: np.ndarray                 # D x K
    topic_word_counts: np.ndarray     # K x V
    doc_topic_counts: np.ndarray      # D x K
    assignments: List[np.ndarray]     # per document, one topic per token
    doc_ids: List[str] = field(default_factory=list)

    @property
    def vocab_size(self) -> int:
        return self.beta.shape[1]

    def doc_index(self, video_id: str) -> int:
        if not hasattr(self, "_index"):
            self._index = {v: i for i, v in enumerate(self.doc_ids)}
        try:
            return self._index[video_id]
        except KeyError:
            raise KeyError(f"video {video_id!r} was not part of the topic model fit; "
                           "use lda_infer for unseen documents") from None


def _flatten(documents):
    docs, words = [], []
    for d, bag in enumerate(documents):
        for w in sorted(bag):
            docs.extend([d] * bag[w])
            words.extend([w] * bag[w])
    return np.asarray(docs, dtype=np.int64), np.asarray(words, dtype=np.int64)


def lda_fit(documents: Sequence[Mapping[int, int]], K: int = 20, *,
            alpha: Optional[float] = None, eta: float = 0.01,
            iterations: int = 1000, burn_in: int = 200, thin: int = 20,
            rng: np.random.Generator, vocab_size: Optional[int] = None,
            doc_ids: Optional[Sequence[str]] = None) -> TopicModel:
    """Collapsed Gibbs sampling for LDA.

    ``documents`` are bags of words (word index -> count). ``alpha`` defaults
    to 50/K. After ``burn_in`` sweeps every ``thin``-th sweep contributes to
    the posterior means (n_kw + eta) / (n_k + V eta) and
    (n_dk + alpha) / (n_d + K alpha).
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if not documents:
        raise ValueError("no documents")
    if alpha is None:
        alpha = 50.0 / K
    if burn_in >= iterations:
        raise ValueError("burn_in must be smaller than iterations")
    docs, words = _flatten(documents)
    if words.size == 0:
        raise ValueError("all documents are empty")
    V = int(vocab_size if vocab_size is not None else words.max() + 1)
    if words.max() >= V:
        raise ValueError("word index outside the vocabulary")
    D = len(documents)

    z = rng.integers(0, K, size=words.size).astype(np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nkw = np.zeros((K, V), dtype=np.int64)
    np.add.at(ndk, (docs, z), 1)
    np.add.at(nkw, (z, words), 1)
    nk = nkw.sum(axis=1)
    doc_len = ndk.sum(axis=1)

    beta_sum = np.zeros((K, V))
    theta_sum = np.zeros((D, K))
    n_samples = 0
    for it in range(1, iterations + 1):
        _gibbs_sweep(docs, words, z, ndk, nkw, nk, float(alpha), float(eta), rng.random(words.size))
        if it > burn_in and (it - burn_in) % thin == 0:
            beta_sum += (nkw + eta) / (nk[:, None] + V * eta)
            theta_sum += (ndk + alpha) / (doc_len[:, None] + K * alpha)
            n_samples += 1
    if n_samples == 0:
        beta_sum += (nkw + eta) / (nk[:, None] + V * eta)
        theta_sum += (ndk + alpha) / (doc_len[:, None] + K * alpha)
        n_samples = 1

    offsets = np.concatenate([[0], np.cumsum(doc_len)])
    assignments = [z[offsets[d]:offsets[d + 1]].copy() for d in range(D)]
    if doc_ids is None:
        doc_ids = [str(d) for d in range(D)]
    return TopicModel(K=K, alpha=float(alpha), eta=float(eta),
                      beta=beta_sum / n_samples, theta=theta_sum / n_samples,
                      topic_word_counts=nkw, doc_topic_counts=ndk,
                      assignments=assignments, doc_ids=list(doc_ids))


def lda_infer(document: Mapping[int, int], model: TopicModel, *,
              iterations: int = 200, burn_in: int = 50, thin: int = 10,
              rng: np.random.Generator) -> np.ndarray:
    """Fold-in Gibbs inference of a new document's topic mixture with the
    fitted topic-word distributions held fixed.

    Words outside the model vocabulary are ignored; an empty document gets
    the uniform prior mean.
    """
    K = model.K
    words = np.asarray([w for w in sorted(document) if w < model.vocab_size
                        for _ in range(document[w])], dtype=np.int64)
    if words.size == 0:
        return np.full(K, 1.0 / K)
    beta_t = np.ascontiguousarray(model.beta.T)
    z = rng.integers(0, K, size=words.size).astype(np.int64)
    nk = np.bincount(z, minlength=K).astype(np.int64)
    denom = words.size + K * model.alpha
    acc = np.zeros(K)
    n_samples = 0
    for it in range(1, iterations + 1):
        _foldin_sweep(words, z, nk, beta_t, model.alpha, rng.random(words.size))
        if it > burn_in and (it - burn_in) % thin == 0:
            acc += (nk + model.alpha) / denom
            n_samples += 1
    if n_samples == 0:
        acc = (nk + model.alpha) / denom
        n_samples = 1
    theta = acc / n_samples
    return theta / theta.sum()


def teacher_distribution(video, model: TopicModel) -> np.ndarray:
    """Posterior mean topic mixture of a video that was part of the fit."""
    video_id = video if isinstance(video, str) else video.video_id
    return model.theta[model.doc_index(video_id)].copy()


def argmax_topic(dist) -> int:
    # np.argmax already returns the first (lowest) index among ties
    return int(np.argmax(dist))


def top_words(model: TopicModel, k: int, n: int = 10, vocab=None) -> list:
    """The n highest-probability words of topic k, ties broken by index.

    Returns word indices, or tokens when a vocabulary is given.
    """
    if not 0 <= k < model.K:
        raise IndexError(f"topic {k} out of range [0, {model.K})")
    n = max(0, min(n, model.vocab_size))
    order = np.lexsort((np.arange(model.vocab_size), -model.beta[k]))[:n]
    if vocab is None:
        return [int(i) for i in order]
    return [vocab.token(int(i)) for i in order]


def topic_category_cooccurrence(records, model: TopicModel, n_categories: int = 20,
                                distributions: Optional[Mapping[str, np.ndarray]] = None) -> dict:
    """Assign each categorized video its most likely topic and tabulate
    topics against category tags.

    Distributions come from ``distributions`` when given, otherwise from the
    fitted model (videos outside the fit are skipped). Returns ``counts``
    (K x C ints), ``percent`` (row-normalized, 0 for empty rows) and
    ``videos`` (how many videos were tabulated).
    """
    counts = np.zeros((model.K, n_categories), dtype=np.int64)
    seen = 0
    for r in records:
        if r.category is None:
            continue
        if distributions is not None:
            if r.video_id not in distributions:
                continue
            dist = distributions[r.video_id]
        else:
            try:
                dist = teacher_distribution(r, model)
            except KeyError:
                continue
        counts[argmax_topic(dist), r.category] += 1
        seen += 1
    if seen == 0:
        raise ValueError("no categorized videos to tabulate")
    rows = counts.sum(axis=1, keepdims=True)
    percent = np.divide(100.0 * counts, rows, out=np.zeros(counts.shape), where=rows > 0)
    return {"counts": counts, "percent": percent, "videos": seen}


def topic_report(model: TopicModel, vocab, cooccurrence: Optional[dict] = None,
                 n_words: int = 10, n_categories_shown: int = 3) -> dict:
    """JSON-ready summary: per topic its video count, top words and the
    categories it co-occurs with most."""
    assigned = np.bincount(model.theta.argmax(axis=1), minlength=model.K)
    topics = []
    for k in range(model.K):
        entry = {"topic": k, "videos": int(assigned[k]),
                 "words": top_words(model, k, n_words, vocab)}
        if cooccurrence is not None:
            row = cooccurrence["percent"][k]
            order = [int(c) for c in np.argsort(-row, kind="stable")[:n_categories_shown] if row[c] > 0]
            entry["categories"] = [{"category": c, "percent": round(float(row[c]), 2)} for c in order]
        topics.append(entry)
    return {"K": model.K, "alpha": model.alpha, "eta": model.eta, "topics": topics}


def format_topic_report(report: dict) -> str:
    lines = [f"{'topic':>5}  {'#videos':>7}  {'categories':<28}  representative words"]
    for t in report["topics"]:
        cats = ", ".join(f"{c['category']}:{c['percent']:.0f}%" for c in t.get("categories", []))
        lines.append(f"{t['topic']:>5}  {t['videos']:>7}  {cats:<28}  {' '.join(t['words'])}")
    return "\n".join(lines)


def save_topic_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)


def model_tensors(model: TopicModel) -> Dict[str, np.ndarray]:
    """Float tensors for the checkpoint writer."""
    return {"lda.beta": model.beta, "lda.theta": model.theta,
            "lda.topic_word_counts": model.topic_word_counts.astype(np.float64),
            "lda.doc_topic_counts": model.doc_topic_counts.astype(np.float64)}


def model_from_tensors(meta: dict, tensors: Mapping[str, np.ndarray]) -> TopicModel:
    ndk = tensors["lda.doc_topic_counts"].astype(np.int64)
    return TopicModel(K=int(meta["K"]), alpha=float(meta["alpha"]), eta=float(meta["eta"]),
                      beta=tensors["lda.beta"], theta=tensors["lda.theta"],
                      topic_word_counts=tensors["lda.topic_word_counts"].astype(np.int64),
                      doc_topic_counts=ndk, assignments=[],
                      doc_ids=list(meta["doc_ids"]))
