"""Brute-force reference implementations used only by the tests.

They share no code with the package: n-grams are enumerated by slicing,
LCS is a memoized recursion and CIDEr is computed with dense vectors over
an explicit n-gram index.
"""

import math
from functools import lru_cache

import numpy as np


def grams(tokens, n):
    out = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i:i + n])
        out[g] = out.get(g, 0) + 1
    return out


def bleu4(hyps, refsets):
    num, den = [0] * 4, [0] * 4
    c = r = 0
    for hyp, refs in zip(hyps, refsets):
        c += len(hyp)
        best = None
        for ref in refs:
            key = (abs(len(ref) - len(hyp)), len(ref))
            if best is None or key < best:
                best = key
        r += best[1]
        for n in range(1, 5):
            hg = grams(hyp, n)
            for g, k in hg.items():
                num[n - 1] += min(k, max(grams(ref, n).get(g, 0) for ref in refs))
            den[n - 1] += max(0, len(hyp) - n + 1)
    if 0 in num:
        return 0.0
    p = [a / b for a, b in zip(num, den)]
    bp = 1.0 if c > r else math.exp(1 - r / c)
    return bp * (p[0] * p[1] * p[2] * p[3]) ** 0.25


def lcs(a, b):
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if a[i] == b[j]:
            return 1 + go(i + 1, j + 1)
        return max(go(i + 1, j), go(i, j + 1))
    return go(0, 0)


def rouge_l(hyps, refsets, beta=1.2):
    scores = []
    for hyp, refs in zip(hyps, refsets):
        best = 0.0
        for ref in refs:
            m = lcs(hyp, ref)
            if m and hyp:
                p, rc = m / len(hyp), m / len(ref)
                best = max(best, (1 + beta ** 2) * p * rc / (rc + beta ** 2 * p))
        scores.append(best)
    return sum(scores) / len(scores)


def cider(hyps, refsets):
    N = len(hyps)
    total = 0.0
    per = []
    for n in range(1, 5):
        index = {}
        for toks in list(hyps) + [ref for refs in refsets for ref in refs]:
            for g in grams(toks, n):
                index.setdefault(g, len(index))
        df = np.zeros(len(index))
        for refs in refsets:
            present = set()
            for ref in refs:
                present |= set(grams(ref, n))
            for g in present:
                df[index[g]] += 1
        idf = math.log(N) - np.log(np.maximum(df, 1.0))

        def vec(toks):
            v = np.zeros(len(index))
            for g, k in grams(toks, n).items():
                v[index[g]] = k
            return v * idf
        sims = []
        for hyp, refs in zip(hyps, refsets):
            hv = vec(hyp)
            s = 0.0
            for ref in refs:
                rv = vec(ref)
                d = np.linalg.norm(hv) * np.linalg.norm(rv)
                s += 0.0 if d == 0 else hv @ rv / d
            sims.append(s / len(refs))
        per.append(sims)
    per = np.array(per)              # 4 x N
    return float(np.mean(10.0 * per.mean(axis=0)))


def random_corpus(rng, n_videos=None, vocab=6):
    n_videos = n_videos or int(rng.integers(2, 6))
    words = [f"w{i}" for i in range(vocab)]
    pick = lambda: [words[int(i)] for i in rng.integers(0, vocab, size=int(rng.integers(1, 9)))]
    hyps = [pick() for _ in range(n_videos)]
    refs = [[pick() for _ in range(int(rng.integers(1, 4)))] for _ in range(n_videos)]
    return hyps, refs


def textbook_beam(next_log_probs, vocab_size, eos, B, max_len=30):
    """Beam search expanding every live hypothesis by the whole vocabulary.

    ``next_log_probs(prefix)`` returns the next-token log-probabilities.
    Finished hypotheses leave the beam; the best finished one is returned
    as (score, tokens), ties to the lexicographically smaller sequence.
    """
    beams, done = [((), 0.0)], []
    for _ in range(max_len):
        cands = []
        for toks, score in beams:
            lp = next_log_probs(toks)
            cands.extend((score + lp[w], toks + (w,)) for w in range(vocab_size))
        cands.sort(key=lambda c: (-c[0], c[1]))
        beams = []
        for score, toks in cands[:B]:
            if toks[-1] == eos or len(toks) == max_len:
                done.append((score, toks))
            else:
                beams.append((toks, score))
        if not beams:
            break
    return min(done, key=lambda c: (-c[0], c[1]))
