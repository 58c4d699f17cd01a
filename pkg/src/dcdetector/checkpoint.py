"""Named-tensor checkpoint format.

A checkpoint is a directory holding two files:

* ``manifest.json``: ``{"format": ..., "metadata": {...}, "blob_bytes": n,
  "tensors": [{"name", "shape", "offset"}, ...]}`` with byte offsets into
* ``weights.bin``: all tensors concatenated as little-endian float32,
  row-major.
"""

from __future__ import annotations

import json
import math
import os

import numpy as np

from .errors import CorruptCheckpointError

FORMAT = "dcdetector-ckpt-v1"
MANIFEST = "manifest.json"
BLOB = "weights.bin"
_F32 = np.dtype("<f4")


def save_tensors(path, tensors, metadata=None):
    """Write ``tensors`` (mapping name -> array-like) under directory ``path``."""
    os.makedirs(path, exist_ok=True)
    entries, chunks, offset = [], [], 0
    for name, arr in tensors.items():
        a = np.ascontiguousarray(np.asarray(arr), dtype=_F32)
        entries.append({"name": name, "shape": list(a.shape), "offset": offset})
        chunks.append(a.tobytes(order="C"))
        offset += a.nbytes
    manifest = {"format": FORMAT, "metadata": metadata or {}, "blob_bytes": offset, "tensors": entries}
    with open(os.path.join(path, BLOB), "wb") as fh:
        for c in chunks:
            fh.write(c)
    with open(os.path.join(path, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)


def load_tensors(path):
    """Return ``(tensors, metadata)``; raises CorruptCheckpointError on any mismatch."""
    try:
        with open(os.path.join(path, MANIFEST), encoding="utf-8") as fh:
            manifest = json.load(fh)
        with open(os.path.join(path, BLOB), "rb") as fh:
            blob = fh.read()
    except FileNotFoundError as exc:
        raise CorruptCheckpointError(f"missing checkpoint file: {exc.filename}") from None
    except json.JSONDecodeError as exc:
        raise CorruptCheckpointError(f"unreadable manifest: {exc}") from None

    if manifest.get("format") != FORMAT:
        raise CorruptCheckpointError(f"unknown checkpoint format {manifest.get('format')!r}")
    if len(blob) != manifest.get("blob_bytes"):
        raise CorruptCheckpointError(
            f"blob has {len(blob)} bytes, manifest expects {manifest.get('blob_bytes')}")

    tensors = {}
    for entry in manifest["tensors"]:
        shape = tuple(entry["shape"])
        start = entry["offset"]
        stop = start + math.prod(shape) * _F32.itemsize
        if start < 0 or stop > len(blob):
            raise CorruptCheckpointError(f"tensor {entry['name']!r} runs past end of blob")
        tensors[entry["name"]] = np.frombuffer(blob[start:stop], dtype=_F32).reshape(shape).copy()
    return tensors, manifest.get("metadata", {})
