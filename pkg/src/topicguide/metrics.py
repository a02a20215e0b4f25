"""Corpus-level multi-reference caption metrics: BLEU@4, ROUGE-L, CIDEr.

CIDEr is the consensus formulation (raw n-gram counts weighted by
log(N / df), cosine similarity per n averaged over references, times 10)
without the length penalty and count clipping of CIDEr-D. BLEU uses the
closest reference length for the brevity penalty and no smoothing.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Sequence

import numpy as np

from .corpus import tokenize


@dataclass(frozen=True)
class EvalPair:
    video_id: str
    hypothesis: tuple
    references: tuple

    def __post_init__(self):
        if not self.references:
            raise ValueError(f"{self.video_id}: no references")

    @classmethod
    def from_text(cls, video_id: str, hypothesis: str, references: Sequence[str]) -> "EvalPair":
        return cls(video_id, tuple(tokenize(hypothesis)), tuple(tuple(tokenize(r)) for r in references))


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _closest_ref_len(hyp_len: int, refs) -> int:
    # ties go to the shorter reference
    return min((abs(len(r) - hyp_len), len(r)) for r in refs)[1]


def bleu4(pairs: Sequence[EvalPair]) -> float:
    if not pairs:
        raise ValueError("no hypotheses to score")
    matched = [0] * 4
    total = [0] * 4
    hyp_len = ref_len = 0
    for p in pairs:
        hyp_len += len(p.hypothesis)
        ref_len += _closest_ref_len(len(p.hypothesis), p.references)
        for n in range(1, 5):
            counts = ngrams(p.hypothesis, n)
            max_ref = Counter()
            for r in p.references:
                max_ref |= ngrams(r, n)
            matched[n - 1] += sum(min(c, max_ref[g]) for g, c in counts.items())
            total[n - 1] += max(len(p.hypothesis) - n + 1, 0)
    if min(matched) == 0:
        return 0.0
    log_prec = sum(math.log(m / t) for m, t in zip(matched, total)) / 4.0
    bp = 1.0 if hyp_len > ref_len else math.exp(1.0 - ref_len / hyp_len)
    return bp * math.exp(log_prec)


def lcs_length(a: Sequence, b: Sequence) -> int:
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_pair(hyp: Sequence, refs, beta: float = 1.2) -> float:
    if not hyp:
        return 0.0
    best = 0.0
    for ref in refs:
        lcs = lcs_length(hyp, ref)
        if lcs == 0:
            continue
        p = lcs / len(hyp)
        r = lcs / len(ref)
        best = max(best, (1 + beta ** 2) * p * r / (r + beta ** 2 * p))
    return best


def rouge_l(pairs: Sequence[EvalPair], beta: float = 1.2) -> float:
    if not pairs:
        raise ValueError("no hypotheses to score")
    return float(np.mean([rouge_l_pair(p.hypothesis, p.references, beta) for p in pairs]))


class CiderScorer:
    """Document frequencies over the reference sets of a corpus.

    Building the table once lets disjoint subsets of pairs be scored
    concurrently against the same statistics.
    """

    def __init__(self, pairs: Sequence[EvalPair], n: int = 4):
        self.n = n
        self.df: Counter = Counter()
        for p in pairs:
            seen = set()
            for r in p.references:
                for k in range(1, n + 1):
                    seen.update(ngrams(r, k))
            self.df.update(seen)
        self.log_n = math.log(float(len(pairs))) if pairs else 0.0

    def _vector(self, tokens):
        vecs, norms = [], []
        for k in range(1, self.n + 1):
            v = {g: c * (self.log_n - math.log(max(1.0, self.df[g])))
                 for g, c in ngrams(tokens, k).items()}
            vecs.append(v)
            norms.append(math.sqrt(sum(x * x for x in v.values())))
        return vecs, norms

    def score_pair(self, pair: EvalPair) -> float:
        hv, hn = self._vector(pair.hypothesis)
        sims = np.zeros(self.n)
        for ref in pair.references:
            rv, rn = self._vector(ref)
            for k in range(self.n):
                if hn[k] == 0 or rn[k] == 0:
                    continue
                dot = sum(x * rv[k].get(g, 0.0) for g, x in hv[k].items())
                sims[k] += dot / (hn[k] * rn[k])
        return 10.0 * float(sims.mean()) / len(pair.references)


def cider_scores(pairs: Sequence[EvalPair]) -> List[float]:
    if not pairs:
        raise ValueError("no hypotheses to score")
    scorer = CiderScorer(pairs)
    return [scorer.score_pair(p) for p in pairs]


def cider(pairs: Sequence[EvalPair]) -> float:
    return float(np.mean(cider_scores(pairs)))


def evaluate_corpus(pairs: Sequence[EvalPair]) -> dict:
    """All three metrics plus a per-video breakdown and the number of
    distinct words used across the hypotheses."""
    pairs = sorted(pairs, key=lambda p: p.video_id)
    ciders = cider_scores(pairs)
    per_video = [{"video_id": p.video_id, "bleu4": bleu4([p]),
                  "rouge_l": rouge_l_pair(p.hypothesis, p.references), "cider": c}
                 for p, c in zip(pairs, ciders)]
    return {"bleu4": bleu4(pairs), "rouge_l": rouge_l(pairs), "cider": float(np.mean(ciders)),
            "unique_words": len({t for p in pairs for t in p.hypothesis}),
            "videos": len(pairs), "per_video": per_video}


def format_report(reports: Dict[str, dict]) -> str:
    """Aligned table, one row per named report."""
    width = max([len("system")] + [len(k) for k in reports])
    lines = [f"{'system':<{width}}  {'BLEU@4':>8}  {'ROUGE-L':>8}  {'CIDEr':>8}  {'#words':>6}"]
    for name, r in reports.items():
        lines.append(f"{name:<{width}}  {r['bleu4']:>8.4f}  {r['rouge_l']:>8.4f}  "
                     f"{r['cider']:>8.4f}  {r['unique_words']:>6d}")
    return "\n".join(lines)


def save_report(report: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)


def paired_bootstrap(scores_a: Sequence[float], scores_b: Sequence[float],
                     rng: np.random.Generator, samples: int = 1000) -> float:
    """Fraction of bootstrap resamples in which system A's mean per-video
    score fails to exceed system B's (a one-sided p-value estimate)."""
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.size == 0:
        raise ValueError("paired scores must be non-empty and aligned")
    idx = rng.integers(0, a.size, size=(samples, a.size))
    return float(np.mean(a[idx].mean(axis=1) <= b[idx].mean(axis=1)))
