"""Video records, caption tokenization, vocabulary and bag-of-words
construction, plus a synthetic corpus generator with known topics."""

from __future__ import annotations

import json
import math
import string
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

BOS = "<bos>"
EOS = "<eos>"
UNK = "<unk>"

MIN_COUNT = 3
MAX_CAPTION_LEN = 30
MIN_SPEECH_WORDS = 10
SPLITS = ("train", "val", "test")

# A fixed English stopword list (~150 words). Override with load_stopwords().
STOPWORDS = frozenset("""
a about above after again against all am an and any are as at be because been
before being below between both but by can could did do does doing down during
each few for from further had has have having he her here hers herself him
himself his how i if in into is it its itself just me more most my myself no
nor not now of off on once only or other our ours ourselves out over own same
she should so some such than that the their theirs them themselves then there
these they this those through to too under until up very was we were what when
where which while who whom why will with would you your yours yourself
yourselves also another around s t there's it's he's she's they're we're
i'm let's that's who's what's here's where's when's why's how's can't won't
don't isn't aren't wasn't weren't hasn't haven't hadn't doesn't didn't
""".split())

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


def tokenize(text: str) -> List[str]:
    """Lowercase, replace ASCII punctuation with spaces and split.

    Hyphenated and apostrophized words are split ("didn't" -> didn, t).
    Non-ASCII characters pass through untouched.
    """
    return text.lower().translate(_PUNCT_TABLE).split()


def load_stopwords(path) -> frozenset:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return frozenset(w.strip().lower() for w in lines if w.strip())


@dataclass(frozen=True)
class VideoRecord:
    video_id: str
    split: str
    captions: tuple = ()
    features: Dict[str, np.ndarray] = field(default_factory=dict)
    category: Optional[int] = None
    speech: Optional[str] = None

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"{self.video_id}: unknown split {self.split!r}")
        if self.split == "train" and not self.captions:
            raise ValueError(f"{self.video_id}: training video without captions")
        if self.category is not None and not 0 <= self.category < 20:
            raise ValueError(f"{self.video_id}: category {self.category} outside [0, 20)")

    def to_json(self) -> dict:
        out = {"video_id": self.video_id, "split": self.split,
               "captions": list(self.captions),
               "features": {k: [float(x) for x in v] for k, v in self.features.items()}}
        if self.category is not None:
            out["category"] = self.category
        if self.speech is not None:
            out["speech"] = self.speech
        return out


class FeatureManifest:
    """Ordered (modality, dimension) list."""

    def __init__(self, entries: Iterable):
        self.entries = [(str(n), int(d)) for n, d in entries]
        names = [n for n, _ in self.entries]
        if len(set(names)) != len(names):
            raise ValueError("duplicate modality names in manifest")
        for n, d in self.entries:
            if d <= 0:
                raise ValueError(f"modality {n!r} has non-positive dimension {d}")

    @property
    def total_dim(self) -> int:
        return sum(d for _, d in self.entries)

    def dim(self, name: str) -> int:
        for n, d in self.entries:
            if n == name:
                return d
        raise KeyError(name)

    def validate(self, record: VideoRecord) -> None:
        known = dict(self.entries)
        for name, vec in record.features.items():
            if name not in known:
                raise ValueError(f"{record.video_id}: modality {name!r} not in manifest")
            if len(vec) != known[name]:
                raise ValueError(f"{record.video_id}: modality {name!r} has length "
                                 f"{len(vec)}, manifest says {known[name]}")

    def to_json(self) -> dict:
        return dict(self.entries)

    @classmethod
    def load(cls, path) -> "FeatureManifest":
        with open(path, encoding="utf-8") as f:
            return cls(json.load(f).items())

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, indent=2)

    def __eq__(self, other):
        return isinstance(other, FeatureManifest) and self.entries == other.entries

    def __repr__(self):
        return f"FeatureManifest({self.entries!r})"


def record_from_json(obj: dict, manifest: Optional[FeatureManifest] = None) -> VideoRecord:
    feats = {k: np.asarray(v, dtype=np.float64) for k, v in (obj.get("features") or {}).items()}
    rec = VideoRecord(video_id=str(obj["video_id"]), split=obj["split"],
                      captions=tuple(obj.get("captions") or ()), features=feats,
                      category=obj.get("category"), speech=obj.get("speech"))
    if manifest is not None:
        manifest.validate(rec)
    return rec


def load_corpus(path, manifest: Optional[FeatureManifest] = None) -> List[VideoRecord]:
    """Read a JSON Lines corpus, validating feature lengths against ``manifest``."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            if not line.strip():
                continue
            try:
                records.append(record_from_json(json.loads(line), manifest))
            except (KeyError, json.JSONDecodeError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return records


def save_corpus(records: Iterable[VideoRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in records:
            f.write(json.dumps(r.to_json()) + "\n")


class Vocabulary:
    """Token <-> index map. Indices 0, 1, 2 are BOS, EOS, UNK."""

    def __init__(self, tokens: Sequence[str] = (), min_count: int = MIN_COUNT):
        self.min_count = min_count
        self.itos: List[str] = [BOS, EOS, UNK]
        for t in tokens:
            if t not in (BOS, EOS, UNK):
                self.itos.append(t)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    bos = 0
    eos = 1
    unk = 2

    def __len__(self):
        return len(self.itos)

    def __contains__(self, token):
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, self.unk)

    def token(self, idx: int) -> str:
        return self.itos[idx]

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.index(t) for t in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.itos[i] for i in ids if i not in (self.bos, self.eos)]

    def to_json(self) -> dict:
        return {"tokens": self.itos[3:], "min_count": self.min_count}

    @classmethod
    def from_json(cls, obj: dict) -> "Vocabulary":
        return cls(obj["tokens"], obj.get("min_count", MIN_COUNT))

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos


def build_vocabulary(records: Sequence[VideoRecord], min_count: int = MIN_COUNT) -> Vocabulary:
    """Vocabulary of caption tokens seen at least ``min_count`` times in the
    training split. Tokens are ordered by descending count, then alphabetically."""
    train = [r for r in records if r.split == "train"]
    if not train:
        raise ValueError("cannot build a vocabulary from an empty training split")
    counts = Counter(t for r in train for c in r.captions for t in tokenize(c))
    kept = sorted((t for t, n in counts.items() if n >= min_count),
                  key=lambda t: (-counts[t], t))
    return Vocabulary(kept, min_count)


def to_bag_of_words(tokens: Sequence[str], vocab: Vocabulary,
                    stopwords=STOPWORDS) -> Dict[int, int]:
    """Counts of in-vocabulary, non-stopword tokens keyed by word index."""
    bag: Dict[int, int] = {}
    for t in tokens:
        if t in stopwords:
            continue
        i = vocab.index(t)
        if i == vocab.unk:
            continue
        bag[i] = bag.get(i, 0) + 1
    return bag


def video_document(record: VideoRecord, vocab: Vocabulary, stopwords=STOPWORDS) -> Dict[int, int]:
    """One topic-model document per video: all of its captions pooled."""
    tokens = [t for c in record.captions for t in tokenize(c)]
    return to_bag_of_words(tokens, vocab, stopwords)


def clean_speech(transcript: Optional[str], vocab: Vocabulary) -> Optional[List[str]]:
    """Drop out-of-vocabulary words; a transcript left with fewer than ten
    words counts as no speech at all."""
    if transcript is None:
        return None
    kept = [t for t in tokenize(transcript)
            if t in vocab.stoi and vocab.stoi[t] not in (vocab.bos, vocab.eos, vocab.unk)]
    if len(kept) < MIN_SPEECH_WORDS:
        return None
    return kept


def caption_ids(caption: str, vocab: Vocabulary, max_len: int = MAX_CAPTION_LEN) -> List[int]:
    """Word ids followed by EOS, with words truncated so at most ``max_len``
    tokens (EOS included) are predicted."""
    ids = vocab.encode(tokenize(caption))[: max_len - 1]
    return ids + [vocab.eos]


@dataclass
class SyntheticCorpus:
    records: List[VideoRecord]
    manifest: FeatureManifest
    words: List[str]               # surface form of each generating word index
    topic_word: np.ndarray         # K x V generating distributions
    mixtures: np.ndarray           # n_videos x K generating topic mixtures
    topics: np.ndarray             # dominant generating topic per video

    @property
    def blocks(self) -> List[List[str]]:
        K, V = self.topic_word.shape
        return [[self.words[j] for j in np.flatnonzero(self.topic_word[k] > 0)] for k in range(K)]


def generate_synthetic_corpus(K: int, vocab_size: int, videos_per_topic: int,
                              rng: np.random.Generator, *,
                              captions_per_video: int = 20, caption_length: int = 8,
                              dominance: float = 0.7, mix_alpha: float = 0.5,
                              decay: float = 0.85, noise: float = 0.05,
                              appearance_dim: int = 8, speech_fraction: float = 0.5,
                              speech_length: int = 20,
                              split_fractions=(0.8, 0.1, 0.1)) -> SyntheticCorpus:
    """Sample a corpus from the LDA generative process with disjoint topics.

    Topic k owns the k-th contiguous block of ``vocab_size // K`` words, with
    geometrically decaying word probabilities inside the block. Each video
    has a dominant topic k and mixture ``dominance * e_k + (1 - dominance) *
    Dirichlet(mix_alpha)``. Every caption word draws a topic from the mixture
    and then a word from that topic.

    Features: ``topic_mix`` is the mixture plus Gaussian noise of scale
    ``noise``; ``appearance`` is a per-video random vector carrying no topic
    information. The category tag equals the dominant topic (when K <= 20),
    and a ``speech_fraction`` of videos get a transcript drawn the same way.
    """
    if K < 2:
        raise ValueError("need at least two topics")
    if vocab_size < K:
        raise ValueError("vocabulary smaller than the number of topics")
    block = vocab_size // K
    words = [f"w{j:04d}" for j in range(block * K)]
    V = len(words)
    topic_word = np.zeros((K, V))
    weights = decay ** np.arange(block)
    weights /= weights.sum()
    for k in range(K):
        topic_word[k, k * block:(k + 1) * block] = weights

    n = K * videos_per_topic
    topics = np.repeat(np.arange(K), videos_per_topic)
    topics = topics[rng.permutation(n)]
    mixtures = np.empty((n, K))
    records = []
    split_cut = np.cumsum(np.asarray(split_fractions) / np.sum(split_fractions)) * n
    manifest_entries = [("topic_mix", K)]
    if appearance_dim > 0:
        manifest_entries.append(("appearance", appearance_dim))
    manifest = FeatureManifest(manifest_entries)

    def draw_words(theta, count):
        z = rng.choice(K, size=count, p=theta)
        return [words[rng.choice(V, p=topic_word[k])] for k in z]

    for i in range(n):
        k = topics[i]
        theta = (1.0 - dominance) * rng.dirichlet(np.full(K, mix_alpha))
        theta[k] += dominance
        mixtures[i] = theta
        captions = tuple(" ".join(draw_words(theta, caption_length))
                         for _ in range(captions_per_video))
        feats = {"topic_mix": theta + noise * rng.standard_normal(K)}
        if appearance_dim > 0:
            feats["appearance"] = rng.standard_normal(appearance_dim)
        speech = None
        if rng.random() < speech_fraction:
            speech = " ".join(draw_words(theta, speech_length))
        split = SPLITS[int(np.searchsorted(split_cut, i, side="right"))]
        records.append(VideoRecord(
            video_id=f"video{i:05d}", split=split, captions=captions, features=feats,
            category=int(k) if K <= 20 else None, speech=speech))
    return SyntheticCorpus(records, manifest, words, topic_word, mixtures, topics)


@dataclass
class StyledCorpus:
    records: List[VideoRecord]
    manifest: FeatureManifest
    mixtures: np.ndarray      # n_videos x K generating topic mixtures
    topics: np.ndarray        # dominant topic per video
    objects: np.ndarray       # content id per video


def generate_styled_corpus(K: int, n_objects: int, videos_per_cell: int,
                           rng: np.random.Generator, *, captions_per_video: int = 20,
                           dominance: float = 0.8, mix_alpha: float = 0.5,
                           synonyms: int = 2, noise: float = 0.1,
                           test_fraction: float = 0.3, n_slots: int = 5,
                           word_source: str = "topic") -> StyledCorpus:
    """Captions whose style is set by the topic and whose content is set by
    the video.

    Every video shows one of ``n_objects`` objects (visible in its
    ``appearance`` feature as a noisy one-hot) and has a topic mixture
    dominated by one topic. Each caption draws a topic from the mixture and
    renders ``n_slots`` slots (subject, verb, object, place, time, manner,
    tool, in that order of inclusion) in that topic's style.

    Topic t walks the slots from the subject with its own stride, the t-th
    integer coprime to ``n_slots``, so the word that follows a given slot
    depends on the topic. Non-object words come from a window of
    ``synonyms`` consecutive words starting at the topic index (neighbouring
    topics overlap) or, with ``word_source="object"``, at the object index,
    in which case the topic only sets the word order. The features carry no
    topic information.
    """
    if K < 2:
        raise ValueError("need at least two topics")
    if word_source not in ("topic", "object"):
        raise ValueError("word_source must be 'topic' or 'object'")
    if not 3 <= n_slots <= 7:
        raise ValueError("n_slots must be between 3 and 7")
    slots = ("subj", "verb", "obj", "place", "time", "manner", "tool")[:n_slots]
    strides = [s for s in range(1, n_slots) if math.gcd(s, n_slots) == 1]

    def render(t, o):
        base = t if word_source == "topic" else o
        choice = {kind: f"{kind}{base + int(rng.integers(0, synonyms))}" for kind in slots if kind != "obj"}
        choice["obj"] = f"obj{o}"
        stride = strides[t % len(strides)]
        return " ".join(choice[slots[(j * stride) % n_slots]] for j in range(n_slots))

    cells = [(k, o) for k in range(K) for o in range(n_objects)]
    n = len(cells) * videos_per_cell
    order = rng.permutation(n)
    n_test = int(round(test_fraction * n))
    mixtures = np.empty((n, K))
    topics = np.empty(n, dtype=np.int64)
    objects = np.empty(n, dtype=np.int64)
    records = []
    for i in range(n):
        k, o = cells[order[i] % len(cells)]
        theta = (1.0 - dominance) * rng.dirichlet(np.full(K, mix_alpha))
        theta[k] += dominance
        mixtures[i], topics[i], objects[i] = theta, k, o
        captions = tuple(render(int(rng.choice(K, p=theta)), o) for _ in range(captions_per_video))
        appearance = np.zeros(n_objects)
        appearance[o] = 1.0
        appearance += noise * rng.standard_normal(n_objects)
        records.append(VideoRecord(
            video_id=f"video{i:05d}", split="test" if i < n_test else "train",
            captions=captions, features={"appearance": appearance},
            category=k if k < 20 else None))
    return StyledCorpus(records, FeatureManifest([("appearance", n_objects)]),
                        mixtures, topics, objects)
