"""Binary checkpoint container.

Layout: 8-byte magic, u32 version, u64 header length, UTF-8 JSON header
(config, vocabulary digest, tensor directory), raw little-endian tensor bytes,
then the SHA-256 of everything before it.
"""
from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .model import Model, ModelConfig

MAGIC = b"MREPCKPT"
VERSION = 1
_DIGEST = 32


class ChecksumMismatch(ValueError):
    pass


class VocabMismatch(ValueError):
    pass


def save_checkpoint(model: Model, path: Path | str, vocab_digest: str = "", extra: Optional[dict] = None) -> None:
    directory, blobs, offset = [], [], 0
    for name in sorted(model.params):
        arr = np.ascontiguousarray(model.params[name])
        data = arr.astype(arr.dtype.newbyteorder("<"), copy=False).tobytes()
        directory.append({"name": name, "shape": list(arr.shape), "dtype": arr.dtype.str.lstrip("<>|="),
                          "offset": offset, "nbytes": len(data)})
        blobs.append(data)
        offset += len(data)
    header = json.dumps({"config": model.config.to_dict(), "vocab_digest": vocab_digest,
                         "tensors": directory, "extra": extra or {}}, sort_keys=True).encode("utf-8")
    body = MAGIC + struct.pack("<IQ", VERSION, len(header)) + header + b"".join(blobs)
    tmp = Path(f"{path}.tmp")
    tmp.write_bytes(body + hashlib.sha256(body).digest())
    os.replace(tmp, path)


def read_header(path: Path | str) -> dict:
    return _read(path)[0]


def _read(path: Path | str) -> tuple[dict, bytes, int]:
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 12 + _DIGEST:
        raise ChecksumMismatch(f"{path}: file too short to be a checkpoint")
    body, digest = raw[:-_DIGEST], raw[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ChecksumMismatch(f"{path}: checksum does not match contents")
    if body[:len(MAGIC)] != MAGIC:
        raise ChecksumMismatch(f"{path}: not a checkpoint file")
    version, hlen = struct.unpack_from("<IQ", body, len(MAGIC))
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    start = len(MAGIC) + 12
    header = json.loads(body[start:start + hlen].decode("utf-8"))
    return header, body, start + hlen


def load_checkpoint(path: Path | str, vocab_digest: Optional[str] = None) -> Model:
    """Rebuild a model; ``vocab_digest`` (when given) must match the one saved."""
    header, body, base = _read(path)
    if vocab_digest is not None and header["vocab_digest"] != vocab_digest:
        raise VocabMismatch(f"{path}: checkpoint was trained with different vocabularies")
    params = {}
    for t in header["tensors"]:
        start = base + t["offset"]
        arr = np.frombuffer(body[start:start + t["nbytes"]], dtype=np.dtype("<" + t["dtype"]))
        params[t["name"]] = arr.reshape(t["shape"]).astype(np.dtype(t["dtype"]), copy=True)
    return Model(ModelConfig.from_dict(header["config"]), params)
