"""Checkpoint file format.

Layout (little-endian)::

    b"CRAVECKP"  uint32 format_version  uint32 header_len  header (UTF-8 JSON)
    float32 blobs, concatenated in header order

The JSON header holds the config, its SHA-256 hash, free-form metadata and
the ``(name, shape)`` list for the blobs. Keys are sorted and no
timestamps are written, so identical state gives identical bytes.
"""
import hashlib
import json
import struct

import numpy as np
import torch

from .errors import CheckpointError

MAGIC = b"CRAVECKP"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sII")


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def dumps(state_dict, config, metadata=None):
    tensors = [(name, t.detach().cpu().numpy().astype("<f4")) for name, t in state_dict.items()]
    header = {
        "config": config,
        "config_hash": config_hash(config),
        "metadata": metadata or {},
        "tensors": [{"name": n, "shape": list(a.shape)} for n, a in tensors],
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    parts = [_PREFIX.pack(MAGIC, FORMAT_VERSION, len(head)), head]
    parts.extend(np.ascontiguousarray(a).tobytes() for _, a in tensors)
    return b"".join(parts)


def loads(data, expected_config=None):
    """Parse checkpoint bytes into ``(state_dict, config, metadata)``.

    Raises :class:`CheckpointError` on a bad magic/version, a header whose
    config does not match its stored hash, a mismatch against
    ``expected_config``, or truncated blobs.
    """
    if len(data) < _PREFIX.size:
        raise CheckpointError("checkpoint is truncated")
    magic, version, head_len = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError(f"not a checkpoint (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    start = _PREFIX.size
    try:
        header = json.loads(data[start:start + head_len])
    except ValueError as exc:
        raise CheckpointError(f"corrupt checkpoint header: {exc}") from None
    config = header["config"]
    if config_hash(config) != header["config_hash"]:
        raise CheckpointError("config hash mismatch: header was modified")
    if expected_config is not None and config_hash(expected_config) != header["config_hash"]:
        raise CheckpointError("checkpoint was written for a different config")
    offset = start + head_len
    state = {}
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        nbytes = 4 * int(np.prod(shape, dtype=np.int64))
        if offset + nbytes > len(data):
            raise CheckpointError(f"blob {entry['name']!r} is truncated")
        arr = np.frombuffer(data, dtype="<f4", count=nbytes // 4, offset=offset).reshape(shape)
        state[entry["name"]] = torch.from_numpy(arr.astype(np.float32))
        offset += nbytes
    if offset != len(data):
        raise CheckpointError("trailing bytes after the last blob")
    return state, config, header["metadata"]


def save(path, state_dict, config, metadata=None):
    data = dumps(state_dict, config, metadata)
    with open(path, "wb") as fh:
        fh.write(data)
    return data


def load(path, expected_config=None):
    with open(path, "rb") as fh:
        return loads(fh.read(), expected_config)
