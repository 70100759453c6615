"""Versioned binary checkpoint container.

Layout (all integers little-endian)::

    offset 0   8 bytes   magic b"SARCKPT\\0"
    offset 8   u32       format version (currently 1)
    offset 12  u64       header length H in bytes
    offset 20  H bytes   UTF-8 JSON header
    ...        padding   zero bytes up to the next multiple of 8
    data       raw C-order array bytes, each entry starting on an 8-byte boundary

The JSON header has two keys: ``tensors`` (list of {name, dtype, shape,
offset, nbytes}, offsets relative to the start of the data section) and
``meta`` (free-form JSON: configs, optimizer scalars, channel statistics).
Supported dtypes are ``<f4``, ``<f8``, ``<i8`` and ``|u1``.
"""

from __future__ import annotations

import json
import os
import struct
from pathlib import Path

import numpy as np

MAGIC = b"SARCKPT\0"
VERSION = 1
_DTYPES = ("<f4", "<f8", "<i8", "|u1")


def _align(n, k=8):
    return (n + k - 1) // k * k


def save_checkpoint(path, tensors: dict, meta: dict | None = None) -> Path:
    path = Path(path)
    entries, blobs, offset = [], [], 0
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        dt = arr.dtype.newbyteorder("<") if arr.dtype.byteorder == ">" else arr.dtype
        code = np.dtype(dt).str
        if code not in _DTYPES:
            raise ValueError(f"{name}: unsupported dtype {arr.dtype}")
        raw = np.ascontiguousarray(arr, dtype=code).tobytes()
        entries.append({"name": name, "dtype": code, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(raw)})
        blobs.append((offset, raw))
        offset = _align(offset + len(raw))
    header = json.dumps({"tensors": entries, "meta": meta or {}}, sort_keys=True).encode()
    prefix = MAGIC + struct.pack("<IQ", VERSION, len(header)) + header
    data_start = _align(len(prefix))
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(prefix)
        fh.write(b"\0" * (data_start - len(prefix)))
        pos = 0
        for off, raw in blobs:
            fh.write(b"\0" * (off - pos))
            fh.write(raw)
            pos = off + len(raw)
    os.replace(tmp, path)
    return path


def load_checkpoint(path):
    """Return ``(tensors, meta)`` from a checkpoint file."""
    buf = Path(path).read_bytes()
    if buf[:8] != MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic)")
    version, hlen = struct.unpack_from("<IQ", buf, 8)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    header = json.loads(buf[20:20 + hlen].decode())
    data_start = _align(20 + hlen)
    tensors = {}
    for e in header["tensors"]:
        start = data_start + e["offset"]
        arr = np.frombuffer(buf, dtype=e["dtype"], count=int(np.prod(e["shape"], dtype=np.int64)),
                            offset=start)
        tensors[e["name"]] = arr.reshape(e["shape"]).copy()
    return tensors, header["meta"]
