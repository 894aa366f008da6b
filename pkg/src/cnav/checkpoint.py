"""Single-file binary checkpoint container.

Layout, all little-endian:

    bytes 0..3   magic ``CNAV``
    byte  4      format version (currently 1)
    bytes 5..8   uint32 header length N
    bytes 9..    UTF-8 JSON header of N bytes
    rest         raw tensor payloads

The JSON header is ``{"tensors": [...], "meta": {...}}`` where each tensor
entry records name, shape, dtype string (numpy ``<f4`` style) and byte
offset into the payload region.  Values survive a save/load round trip
bit-exactly.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"CNAV"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, tensors, meta: dict | None = None) -> None:
    """Write named arrays to ``path``.

    ``tensors`` is an iterable of (name, numpy array); names must be unique.
    ``meta`` must be JSON-serializable.
    """
    entries = []
    blobs = []
    offset = 0
    seen = set()
    for name, arr in tensors:
        if name in seen:
            raise CheckpointError(f"duplicate tensor name '{name}'")
        seen.add(name)
        arr = np.asarray(arr)
        le = arr.dtype.newbyteorder("<")
        raw = np.ascontiguousarray(arr, dtype=le).tobytes()
        entries.append({
            "name": name,
            "shape": list(arr.shape),
            "dtype": le.str,
            "offset": offset,
            "nbytes": len(raw),
        })
        blobs.append(raw)
        offset += len(raw)
    header = json.dumps({"tensors": entries, "meta": meta or {}}).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<B", VERSION))
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for raw in blobs:
            f.write(raw)


def load_checkpoint(path):
    """Read a container; returns (dict name -> array, meta dict)."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 9 or blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a CNAV checkpoint (bad magic)")
    version = blob[4]
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (hlen,) = struct.unpack_from("<I", blob, 5)
    hstart = 9
    hend = hstart + hlen
    if hend > len(blob):
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[hstart:hend].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from None
    payload = blob[hend:]
    tensors = {}
    for entry in header.get("tensors", []):
        name = entry["name"]
        start = entry["offset"]
        end = start + entry["nbytes"]
        if end > len(payload):
            raise CheckpointError(f"{path}: tensor '{name}' extends past end of file")
        arr = np.frombuffer(payload[start:end], dtype=np.dtype(entry["dtype"]))
        tensors[name] = arr.reshape(entry["shape"]).copy()
    return tensors, header.get("meta", {})
