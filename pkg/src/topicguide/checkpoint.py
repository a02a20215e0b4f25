"""Binary checkpoint format shared by every trained artifact.

Layout (all integers little-endian):

    4 bytes   magic "TGC1"
    uint32    format version
    uint64    metadata length, then that many bytes of UTF-8 JSON
    uint32    tensor count
    per tensor:
        uint16 name length, UTF-8 name
        uint8  ndim, then ndim x uint64 shape
        prod(shape) x float64 data, row-major
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Dict, Mapping, Tuple

import numpy as np

MAGIC = b"TGC1"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, meta: dict, tensors: Mapping[str, np.ndarray]) -> None:
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(blob)), blob,
             struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f8", order="C")  # keeps 0-d shapes
        key = name.encode("utf-8")
        parts.append(struct.pack("<H", len(key)) + key)
        parts.append(struct.pack("<B", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes(order="C"))
    tmp = Path(str(path) + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_checkpoint(path) -> Tuple[dict, Dict[str, np.ndarray]]:
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise CheckpointError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    try:
        (version,) = struct.unpack_from("<I", data, 4)
        if version != VERSION:
            raise CheckpointError(f"{path}: checkpoint format version {version}, "
                                  f"this build reads version {VERSION}")
        (n,) = struct.unpack_from("<Q", data, 8)
        pos = 16
        meta = json.loads(data[pos:pos + n].decode("utf-8"))
        pos += n
        (count,) = struct.unpack_from("<I", data, pos)
        pos += 4
        tensors = {}
        for _ in range(count):
            (klen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + klen].decode("utf-8")
            pos += klen
            (ndim,) = struct.unpack_from("<B", data, pos)
            pos += 1
            shape = struct.unpack_from(f"<{ndim}Q", data, pos)
            pos += 8 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if pos + 8 * size > len(data):
                raise CheckpointError(f"{path}: truncated tensor {name!r}")
            tensors[name] = np.frombuffer(data, dtype="<f8", count=size, offset=pos) \
                .reshape(shape).astype(np.float64)
            pos += 8 * size
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt checkpoint ({exc})") from exc
    if pos != len(data):
        raise CheckpointError(f"{path}: {len(data) - pos} trailing bytes")
    return meta, tensors


# model-specific adapters -------------------------------------------------

def save_caption_model(path, params, vocab, extra: dict = None) -> None:
    meta = {"kind": "captioner", "model": params.config(), "vocabulary": vocab.to_json()}
    if extra:
        meta.update(extra)
    save_checkpoint(path, meta, {f"cap.{k}": v for k, v in params.weights.items()})


def load_caption_model(path):
    from .captioner import CaptionModelParams
    from .corpus import Vocabulary

    meta, tensors = load_checkpoint(path)
    if meta.get("kind") != "captioner":
        raise CheckpointError(f"{path}: holds a {meta.get('kind')!r} model, not a captioner")
    cfg = meta["model"]
    weights = {k[4:]: v for k, v in tensors.items() if k.startswith("cap.")}
    params = CaptionModelParams(cfg["variant"], weights, cfg["feat_dim"], cfg["n_topics"],
                                cfg["vocab_size"], cfg["n_h"], cfg["n_f"])
    return params, Vocabulary.from_json(meta["vocabulary"]), meta


def save_topic_model(path, model, vocab, extra: dict = None) -> None:
    from .topics import model_tensors

    meta = {"kind": "topics", "K": model.K, "alpha": model.alpha, "eta": model.eta,
            "doc_ids": model.doc_ids, "vocabulary": vocab.to_json()}
    if extra:
        meta.update(extra)
    save_checkpoint(path, meta, model_tensors(model))


def load_topic_model(path):
    from .corpus import Vocabulary
    from .topics import model_from_tensors

    meta, tensors = load_checkpoint(path)
    if meta.get("kind") != "topics":
        raise CheckpointError(f"{path}: holds a {meta.get('kind')!r} model, not a topic model")
    return model_from_tensors(meta, tensors), Vocabulary.from_json(meta["vocabulary"]), meta


def save_mlp(path, params, kind: str, extra: dict = None) -> None:
    meta = {"kind": kind, "manifest": params.manifest.to_json() if params.manifest else None}
    if extra:
        meta.update(extra)
    save_checkpoint(path, meta, {f"mlp.{k}": v for k, v in params.weights.items()})


def load_mlp(path, kind: str):
    from .corpus import FeatureManifest
    from .predictor import MlpParams

    meta, tensors = load_checkpoint(path)
    if meta.get("kind") != kind:
        raise CheckpointError(f"{path}: holds a {meta.get('kind')!r} model, not {kind!r}")
    manifest = FeatureManifest(meta["manifest"].items()) if meta.get("manifest") else None
    return MlpParams({k[4:]: v for k, v in tensors.items() if k.startswith("mlp.")}, manifest), meta
