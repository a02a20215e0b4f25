"""End-to-end workflow pieces shared by the command line and the demos:
configuration, topic sources, caption data assembly, captioning and
evaluation."""

from __future__ import annotations

import dataclasses
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from . import captioner as cap
from .corpus import FeatureManifest, VideoRecord, Vocabulary, caption_ids, tokenize
from .metrics import EvalPair, evaluate_corpus
from .predictor import assemble_features

TOPIC_SOURCES = ("teacher", "predicted", "annotated", "category")
WORKERS_ENV = "TOPICGUIDE_WORKERS"


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline. Defaults follow the published
    training settings where those exist."""

    seed: int = 0
    min_count: int = 3
    # topic mining
    K: int = 20
    alpha: Optional[float] = None          # None means 50 / K
    eta: float = 0.01
    lda_iterations: int = 1000
    lda_burn_in: int = 200
    lda_thin: int = 20
    infer_iterations: int = 200
    # topic / category predictors
    predictor_hidden: int = 512
    predictor_lr: float = 1e-4
    predictor_epochs: int = 100
    predictor_batch_size: int = 64
    category_one_hot: bool = False
    # caption models
    variant: str = "tgm"
    hidden: int = 512
    factors: int = 512
    lr: float = 1e-4
    epochs: int = 20
    batch_size: int = 64
    dropout: float = 0.5
    beam_width: int = 5
    max_len: int = 30

    def validate(self) -> "PipelineConfig":
        checks = [
            (0 <= self.seed < 2**64, "seed must be a 64-bit unsigned integer"),
            (self.min_count >= 1, "min_count must be >= 1"),
            (self.K >= 2, "K must be >= 2"),
            (self.alpha is None or self.alpha > 0, "alpha must be positive"),
            (self.eta > 0, "eta must be positive"),
            (0 <= self.lda_burn_in < self.lda_iterations, "need 0 <= lda_burn_in < lda_iterations"),
            (self.lda_thin >= 1 and self.infer_iterations >= 1, "thin and infer_iterations must be >= 1"),
            (self.predictor_hidden >= 1 and self.hidden >= 1 and self.factors >= 1,
             "layer sizes must be positive"),
            (self.predictor_lr > 0 and self.lr > 0, "learning rates must be positive"),
            (self.predictor_epochs >= 0 and self.epochs >= 0, "epochs must be non-negative"),
            (self.predictor_batch_size >= 1 and self.batch_size >= 1, "batch sizes must be >= 1"),
            (self.variant in cap.VARIANTS, f"variant must be one of {cap.VARIANTS}"),
            (0.0 <= self.dropout < 1.0, "dropout must be in [0, 1)"),
            (self.beam_width >= 1, "beam_width must be >= 1"),
            (1 <= self.max_len <= 1000, "max_len must be in [1, 1000]"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid config: {msg}")
        return self

    @classmethod
    def from_dict(cls, values: Mapping) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**values).validate()

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as f:
            values = json.load(f)
        if not isinstance(values, dict):
            raise ValueError(f"{path}: config must be a JSON object")
        return cls.from_dict(values)

    def replace(self, **overrides) -> "PipelineConfig":
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None}).validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def worker_count(flag: Optional[int] = None) -> int:
    if flag is not None:
        return max(1, flag)
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def ordered_map(fn, items: Sequence, workers: int = 1) -> list:
    """Map preserving input order; threads only when workers > 1."""
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def category_distribution(category: int, n_categories: int = 20) -> np.ndarray:
    z = np.zeros(n_categories)
    z[category] = 1.0
    return z


def caption_data(records: Sequence[VideoRecord], vocab: Vocabulary, manifest: FeatureManifest,
                 topics: Optional[Mapping[str, np.ndarray]], n_topics: int,
                 max_len: int = cap.MAX_LEN) -> cap.CaptionData:
    """One training pair per (video, caption). Videos without a topic entry
    are an error when topics are required."""
    feats, zs, pairs = [], [], []
    for row, r in enumerate(records):
        feats.append(assemble_features(r, manifest))
        if topics is None:
            zs.append(np.zeros(n_topics))
        else:
            if r.video_id not in topics:
                raise KeyError(f"no topic distribution for video {r.video_id}")
            zs.append(np.asarray(topics[r.video_id], dtype=np.float64))
        for c in r.captions:
            if tokenize(c):
                pairs.append((row, caption_ids(c, vocab, max_len)))
    return cap.CaptionData(np.array(feats), np.array(zs).reshape(len(records), n_topics), pairs)


def generate_captions(records: Sequence[VideoRecord], params: cap.CaptionModelParams,
                      vocab: Vocabulary, manifest: FeatureManifest,
                      topics: Optional[Mapping[str, np.ndarray]], *, beam_width: int = 5,
                      max_len: int = cap.MAX_LEN, workers: int = 1) -> List[dict]:
    """Beam-search a caption for every record; rows match the caption
    export format."""
    def one(r):
        z = None if topics is None else topics[r.video_id]
        if z is None:
            z = np.zeros(params.n_topics)
        hyp = cap.beam_search(assemble_features(r, manifest), z, params, beam_width, max_len)
        return {"video_id": r.video_id, "caption": " ".join(vocab.decode(hyp.tokens)),
                "log_prob": hyp.log_prob, "variant": params.variant}
    return ordered_map(one, list(records), workers)


def save_captions(rows: Sequence[dict], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for row in rows:
            f.write(json.dumps(row) + "\n")


def load_captions(path) -> List[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def evaluate_captions(rows: Sequence[dict], records: Sequence[VideoRecord]) -> dict:
    refs = {r.video_id: r for r in records}
    pairs = []
    for row in rows:
        r = refs.get(row["video_id"])
        if r is None or not r.captions:
            raise KeyError(f"no reference captions for video {row['video_id']}")
        pairs.append(EvalPair.from_text(row["video_id"], row["caption"], r.captions))
    return evaluate_corpus(pairs)


def load_topic_file(path) -> Dict[str, np.ndarray]:
    """Per-video distributions from a JSON Lines file with ``video_id`` and
    ``topics`` keys (the prediction export format)."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            obj = json.loads(line)
            z = np.asarray(obj["topics"], dtype=np.float64)
            if np.any(z < 0) or not np.isclose(z.sum(), 1.0, atol=1e-6):
                raise ValueError(f"{path}:{lineno}: topics for {obj['video_id']} are not a distribution")
            out[obj["video_id"]] = z
    return out


def save_topic_file(topics: Mapping[str, np.ndarray], path, sources=("annotated",)) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for vid, z in topics.items():
            f.write(json.dumps({"video_id": vid, "topics": [float(x) for x in z],
                                "sources": list(sources)}) + "\n")
