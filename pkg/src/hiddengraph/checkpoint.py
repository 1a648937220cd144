"""Binary checkpoints.

Layout, all integers little-endian::

    b"DGM1" | u32 header length | header (UTF-8 JSON) | payload | u32 CRC32(payload)

The header records the variant, the key dimensions, the full model
configuration and the parameter manifest (ordered names and shapes). The
payload is every parameter as little-endian float32, in manifest order.
"""
import json
import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

from .errors import ChecksumError, ConfigError, FormatError, ManifestError, VariantMismatchError
from .graph import GraphVariantConfig
from .model import GraphModel

MAGIC = b"DGM1"
VERSION = 1
_U32 = struct.Struct("<I")


def _header(model):
    cfg = model.config
    return {
        "version": VERSION,
        "variant": cfg.variant,
        "dims": {"N": cfg.num_proposals, "M": cfg.num_nodes, "D": cfg.feat_dim,
                 "A": cfg.attn_dim, "K": cfg.num_classes},
        "static": bool(model.static),
        "config": cfg.to_dict(),
        "manifest": [[name, list(shape)] for name, shape in model.params.manifest()],
    }


def encode_checkpoint(model):
    """Checkpoint bytes for ``model``."""
    header = json.dumps(_header(model), sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = model.params.tobytes()
    return b"".join([MAGIC, _U32.pack(len(header)), header, payload,
                     _U32.pack(zlib.crc32(payload) & 0xFFFFFFFF)])


def save_checkpoint(model, path):
    """Write atomically: a crash never leaves a half-written file at ``path``."""
    path = Path(path)
    data = encode_checkpoint(model)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_header(data):
    """Parse magic and header; returns ``(header dict, payload offset)``."""
    if len(data) < len(MAGIC) + 4:
        raise FormatError("file too short to be a checkpoint")
    if data[:4] != MAGIC:
        if data[:3] == MAGIC[:3]:
            raise FormatError(f"unsupported checkpoint version {data[3:4]!r}")
        raise FormatError("not a checkpoint (bad magic)")
    (size,) = _U32.unpack_from(data, 4)
    start = 8 + size
    if start > len(data):
        raise FormatError("truncated header")
    try:
        header = json.loads(data[8:start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"unreadable header: {exc}") from None
    if not isinstance(header, dict) or header.get("version") != VERSION:
        raise FormatError(f"unsupported header version {header.get('version') if isinstance(header, dict) else None!r}")
    for key in ("variant", "config", "manifest", "static"):
        if key not in header:
            raise FormatError(f"header is missing {key!r}")
    return header, start


def decode_checkpoint(data, expect_variant=None):
    """Rebuild a :class:`GraphModel` from checkpoint bytes.

    Everything is validated before any parameter object is created, so a
    failure never yields a partially loaded model.
    """
    header, start = read_header(data)
    if expect_variant is not None and header["variant"] != expect_variant:
        raise VariantMismatchError(
            f"checkpoint holds a {header['variant']!r} model, expected {expect_variant!r}")
    try:
        manifest = [(str(n), tuple(int(d) for d in s)) for n, s in header["manifest"]]
    except (TypeError, ValueError):
        raise FormatError("malformed manifest") from None
    nbytes = 4 * sum(int(np.prod(s)) for _, s in manifest)
    if len(data) != start + nbytes + 4:
        raise FormatError(
            f"payload is {len(data) - start - 4} bytes, manifest needs {nbytes}")
    payload = data[start:start + nbytes]
    (stored,) = _U32.unpack_from(data, start + nbytes)
    if zlib.crc32(payload) & 0xFFFFFFFF != stored:
        raise ChecksumError("payload checksum mismatch")
    try:
        config = GraphVariantConfig.from_dict(header["config"])
    except (ConfigError, TypeError) as exc:
        raise ManifestError(f"invalid stored configuration: {exc}") from None
    if config.variant != header["variant"]:
        raise ManifestError("header variant disagrees with stored configuration")
    model = GraphModel.build(config, seed=0, static=bool(header["static"]), dtype=np.float32)
    if model.params.manifest() != manifest:
        raise ManifestError("parameter manifest does not match the configuration")
    flat = np.frombuffer(payload, dtype="<f4")
    state, offset = {}, 0
    for name, shape in manifest:
        size = int(np.prod(shape))
        state[name] = flat[offset:offset + size].reshape(shape).astype(np.float32)
        offset += size
    model.params.load_state(state)
    return model


def load_model(path, expect_variant=None):
    return decode_checkpoint(Path(path).read_bytes(), expect_variant)


def load_checkpoint(path, expect_variant=None):
    """``(params, config)`` of the checkpoint at ``path``."""
    model = load_model(path, expect_variant)
    return model.params, model.config


def inspect_checkpoint(path):
    """Header plus payload size and checksum status, without building a model."""
    data = Path(path).read_bytes()
    header, start = read_header(data)
    payload = data[start:-4]
    (stored,) = _U32.unpack_from(data, len(data) - 4)
    return {**header, "payload_bytes": len(payload),
            "num_parameters": len(payload) // 4,
            "checksum_ok": zlib.crc32(payload) & 0xFFFFFFFF == stored}
