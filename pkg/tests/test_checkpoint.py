import struct

import numpy as np
import pytest

from topicguide import captioner as cap
from topicguide.checkpoint import (MAGIC, CheckpointError, load_caption_model, load_checkpoint,
                                   load_mlp, save_caption_model, save_checkpoint, save_mlp)
from topicguide.corpus import Vocabulary
from topicguide.numerics import make_rng
from topicguide.predictor import init_mlp


def test_raw_round_trip_is_bitwise(tmp_path):
    rng = make_rng(0)
    tensors = {"a": rng.standard_normal((3, 4)), "b": np.array([np.pi, -0.0, 1e-300]),
               "scalar": np.array(2.5), "empty": np.zeros((0, 3))}
    save_checkpoint(tmp_path / "x.tgc", {"kind": "test", "n": 1}, tensors)
    meta, back = load_checkpoint(tmp_path / "x.tgc")
    assert meta == {"kind": "test", "n": 1}
    for k, v in tensors.items():
        assert back[k].shape == v.shape
        assert back[k].tobytes() == v.astype("<f8").tobytes()


def test_layout(tmp_path):
    save_checkpoint(tmp_path / "x.tgc", {}, {"w": np.ones(2)})
    data = (tmp_path / "x.tgc").read_bytes()
    assert data[:4] == MAGIC
    assert struct.unpack("<I", data[4:8])[0] == 1


@pytest.mark.parametrize("mutate", ["magic", "truncate", "trailing", "version"])
def test_corruption_detected(tmp_path, mutate):
    path = tmp_path / "x.tgc"
    save_checkpoint(path, {"k": 1}, {"w": np.arange(6.0).reshape(2, 3)})
    data = bytearray(path.read_bytes())
    if mutate == "magic":
        data[:4] = b"XXXX"
    elif mutate == "truncate":
        data = data[:-5]
    elif mutate == "trailing":
        data += b"\0"
    else:
        data[4:8] = struct.pack("<I", 99)
    path.write_bytes(bytes(data))
    with pytest.raises(CheckpointError):
        load_checkpoint(path)


def test_caption_model_round_trip_decodes_identically(tmp_path):
    rng = make_rng(1)
    for v in cap.VARIANTS:
        p = cap.init_caption_model(v, 5, 15, 3, make_rng(2), n_h=8, n_f=4, init_scale=1.0)
        vocab = Vocabulary([f"w{i}" for i in range(12)])
        save_caption_model(tmp_path / f"{v}.tgc", p, vocab, {"note": "x"})
        q, vocab2, meta = load_caption_model(tmp_path / f"{v}.tgc")
        assert vocab2 == vocab and meta["note"] == "x" and q.config() == p.config()
        feats, z = rng.standard_normal(5), rng.dirichlet(np.ones(3))
        a, b = cap.beam_search(feats, z, p, 3), cap.beam_search(feats, z, q, 3)
        assert a.tokens == b.tokens and a.log_prob == b.log_prob


def test_kind_mismatch(tmp_path):
    save_mlp(tmp_path / "m.tgc", init_mlp(3, 2, make_rng(0), 4), "general")
    load_mlp(tmp_path / "m.tgc", "general")
    with pytest.raises(CheckpointError):
        load_mlp(tmp_path / "m.tgc", "category")
    with pytest.raises(CheckpointError):
        load_caption_model(tmp_path / "m.tgc")
