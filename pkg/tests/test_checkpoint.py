import json
import os
import struct
import zlib

import numpy as np
import pytest

from hiddengraph.checkpoint import (MAGIC, decode_checkpoint, encode_checkpoint,
                                    inspect_checkpoint, load_checkpoint, load_model,
                                    read_header, save_checkpoint)
from hiddengraph.engine import run_static, run_streaming
from hiddengraph.errors import (CheckpointError, ChecksumError, FormatError, ManifestError,
                                VariantMismatchError)

from helpers import random_model, random_stream


def rebuild(header, payload):
    """Checkpoint bytes from a header dict and payload, with a valid checksum."""
    head = json.dumps(header).encode()
    return b"".join([MAGIC, struct.pack("<I", len(head)), head, payload,
                     struct.pack("<I", zlib.crc32(payload))])


@pytest.fixture
def model():
    return random_model(np.random.default_rng(0), "visual", 4, 2, 5, k=3)


@pytest.mark.parametrize("variant, static", [("visual", False), ("visual", True),
                                             ("location", True), ("baseline", False)])
def test_round_trip_is_bitwise(tmp_path, variant, static):
    rng = np.random.default_rng(1)
    m = random_model(rng, variant, 4, 2, 5, k=3, static=static)
    save_checkpoint(m, tmp_path / "m.dgm")
    loaded = load_model(tmp_path / "m.dgm")
    assert loaded.params.tobytes() == m.params.tobytes()
    assert loaded.config == m.config and loaded.static == static
    stream = random_stream(rng, 4, 5, 5)
    assert (run_streaming(loaded, stream).logits_array().tobytes()
            == run_streaming(m, stream).logits_array().tobytes())
    if static:
        assert run_static(loaded, stream).tobytes() == run_static(m, stream).tobytes()


def test_load_checkpoint_returns_params_and_config(tmp_path, model):
    save_checkpoint(model, tmp_path / "m.dgm")
    params, config = load_checkpoint(tmp_path / "m.dgm")
    assert params.tobytes() == model.params.tobytes() and config == model.config


def test_layout(model):
    data = encode_checkpoint(model)
    header, start = read_header(data)
    assert data[:4] == b"DGM1"
    assert struct.unpack_from("<I", data, 4)[0] == start - 8
    payload = data[start:-4]
    assert len(payload) == 4 * model.num_parameters()
    assert struct.unpack("<I", data[-4:])[0] == zlib.crc32(payload)
    first_name, first_shape = header["manifest"][0]
    first = np.frombuffer(payload, "<f4", count=int(np.prod(first_shape))).reshape(first_shape)
    np.testing.assert_array_equal(first, model.params[first_name].data)
    assert header["dims"] == {"N": 4, "M": 2, "D": 5, "A": model.config.attn_dim, "K": 3}


def test_double_precision_model_saves_as_float32(model):
    wide = model.copy(np.float64)
    assert decode_checkpoint(encode_checkpoint(wide)).params.tobytes() == model.params.tobytes()


@pytest.mark.parametrize("where", ["payload", "checksum"])
def test_single_byte_corruption_rejected(tmp_path, model, where):
    data = bytearray(encode_checkpoint(model))
    _, start = read_header(bytes(data))
    pos = start + 7 if where == "payload" else len(data) - 2
    data[pos] ^= 0x01
    (tmp_path / "bad.dgm").write_bytes(bytes(data))
    with pytest.raises(ChecksumError):
        load_model(tmp_path / "bad.dgm")
    assert inspect_checkpoint(tmp_path / "bad.dgm")["checksum_ok"] is False


def test_every_payload_byte_is_covered(model):
    data = encode_checkpoint(model)
    _, start = read_header(data)
    rng = np.random.default_rng(2)
    for pos in rng.integers(start, len(data) - 4, size=50):
        bad = bytearray(data)
        bad[pos] ^= 1 << int(rng.integers(8))
        with pytest.raises(ChecksumError):
            decode_checkpoint(bytes(bad))


def test_bad_magic_and_version(model):
    data = encode_checkpoint(model)
    with pytest.raises(FormatError):
        decode_checkpoint(b"XXXX" + data[4:])
    with pytest.raises(FormatError, match="version"):
        decode_checkpoint(b"DGM2" + data[4:])
    header, start = read_header(data)
    with pytest.raises(FormatError, match="version"):
        decode_checkpoint(rebuild({**header, "version": 2}, data[start:-4]))


@pytest.mark.parametrize("cut", [3, 10, -5, -1])
def test_truncation_rejected(model, cut):
    data = encode_checkpoint(model)
    with pytest.raises(FormatError):
        decode_checkpoint(data[:cut])


def test_extra_bytes_rejected(model):
    with pytest.raises(FormatError):
        decode_checkpoint(encode_checkpoint(model) + b"\0")


def test_variant_mismatch(tmp_path, model):
    save_checkpoint(model, tmp_path / "m.dgm")
    with pytest.raises(VariantMismatchError, match="visual"):
        load_model(tmp_path / "m.dgm", expect_variant="location")
    assert load_model(tmp_path / "m.dgm", expect_variant="visual").config.variant == "visual"


def test_manifest_mismatch(model):
    data = encode_checkpoint(model)
    header, start = read_header(data)
    payload = data[start:-4]
    manifest = [list(e) for e in header["manifest"]]
    manifest[0], manifest[1] = manifest[1], manifest[0]
    with pytest.raises(ManifestError):
        decode_checkpoint(rebuild({**header, "manifest": manifest}, payload))
    # consistent sizes, but a configuration that implies other shapes
    config = {**header["config"], "num_classes": 4}
    with pytest.raises(ManifestError):
        decode_checkpoint(rebuild({**header, "config": config}, payload))
    with pytest.raises(ManifestError):
        decode_checkpoint(rebuild({**header, "config": {**header["config"], "num_nodes": 9}},
                                  payload))


def test_errors_share_a_base(model):
    with pytest.raises(CheckpointError):
        decode_checkpoint(b"DGM1\xff\xff\xff\xff{}")


def test_failed_save_keeps_previous_file(tmp_path, model, monkeypatch):
    path = tmp_path / "m.dgm"
    save_checkpoint(model, path)
    before = path.read_bytes()
    other = random_model(np.random.default_rng(3), "visual", 4, 2, 5, k=3)

    def broken(*_):
        raise OSError("disk full")

    monkeypatch.setattr(os, "replace", broken)
    with pytest.raises(OSError):
        save_checkpoint(other, path)
    assert path.read_bytes() == before
    assert os.listdir(tmp_path) == ["m.dgm"]


def test_inspect(tmp_path, model):
    save_checkpoint(model, tmp_path / "m.dgm")
    info = inspect_checkpoint(tmp_path / "m.dgm")
    assert info["variant"] == "visual" and info["checksum_ok"]
    assert info["num_parameters"] == model.num_parameters()
