"""Single-file tensor container: JSON manifest followed by raw little-endian payload.

Layout::

    b"TERMCEE1" | uint64 LE manifest length | manifest (UTF-8 JSON) | payload

The manifest maps every tensor name to its shape, dtype and byte offset into
the payload, and carries an arbitrary JSON ``meta`` object.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

MAGIC = b"TERMCEE1"
_DTYPES = {"float32": "<f4", "float64": "<f8", "int64": "<i8"}


class ContainerError(ValueError):
    pass


def dumps(arrays: Mapping[str, np.ndarray], meta: Mapping | None = None) -> bytes:
    entries = {}
    chunks = []
    offset = 0
    # sorted layout: the bytes depend only on the contents, not on insertion order
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        kind = arr.dtype.name
        if kind not in _DTYPES:
            raise ContainerError(f"unsupported dtype {kind} for tensor {name!r}")
        raw = np.ascontiguousarray(arr, dtype=_DTYPES[kind]).tobytes()
        entries[name] = {"shape": list(arr.shape), "dtype": kind, "offset": offset, "nbytes": len(raw)}
        chunks.append(raw)
        offset += len(raw)
    manifest = {"tensors": entries, "meta": dict(meta or {})}
    head = json.dumps(manifest, sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return MAGIC + struct.pack("<Q", len(head)) + head + b"".join(chunks)


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict]:
    if blob[:8] != MAGIC:
        raise ContainerError("not a tensor container (bad magic)")
    (hlen,) = struct.unpack("<Q", blob[8:16])
    try:
        manifest = json.loads(blob[16:16 + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ContainerError(f"corrupt manifest: {exc}") from exc
    payload = memoryview(blob)[16 + hlen:]
    arrays = {}
    for name, e in manifest["tensors"].items():
        start, stop = e["offset"], e["offset"] + e["nbytes"]
        if stop > len(payload):
            raise ContainerError(f"tensor {name!r} runs past the end of the payload")
        arr = np.frombuffer(payload[start:stop], dtype=_DTYPES[e["dtype"]])
        arrays[name] = arr.astype(e["dtype"]).reshape(e["shape"])
    return arrays, manifest["meta"]


def save(path: str | Path, arrays: Mapping[str, np.ndarray], meta: Mapping | None = None) -> None:
    Path(path).write_bytes(dumps(arrays, meta))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    return loads(Path(path).read_bytes())
