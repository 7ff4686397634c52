"""Binary parameter container.

Layout::

    b"HREC" | uint32 version | uint32 header_len | header JSON (utf-8)
    | float32 payloads in header order | optional trailer JSON (utf-8)

All integers and floats are little-endian.  The header lists
``{"path", "shape", "count"}`` per tensor plus ``payload_bytes``; anything
after the payload is an opaque JSON trailer (used by checkpoints).
"""

from __future__ import annotations

import json
import struct
from collections.abc import Mapping
from pathlib import Path

import numpy as np

MAGIC = b"HREC"
VERSION = 1
_F32 = np.dtype("<f4")


class FormatError(ValueError):
    pass


def dumps(arrays: Mapping[str, np.ndarray], trailer: dict | None = None) -> bytes:
    entries = []
    chunks = []
    for path in sorted(arrays):
        a = np.asarray(arrays[path])
        entries.append({"path": path, "shape": list(a.shape), "count": int(a.size)})
        chunks.append(np.ascontiguousarray(a, dtype=_F32).tobytes())
    payload = b"".join(chunks)
    header = json.dumps(
        {"version": VERSION, "tensors": entries, "payload_bytes": len(payload)},
        sort_keys=True,
        separators=(",", ":"),
    ).encode()
    out = MAGIC + struct.pack("<II", VERSION, len(header)) + header + payload
    if trailer is not None:
        out += json.dumps(trailer, sort_keys=True, separators=(",", ":")).encode()
    return out


def loads(blob: bytes) -> tuple[dict[str, np.ndarray], dict | None]:
    if blob[:4] != MAGIC:
        raise FormatError("not an HREC file (bad magic)")
    if len(blob) < 12:
        raise FormatError("truncated header")
    version, header_len = struct.unpack("<II", blob[4:12])
    if version != VERSION:
        raise FormatError(f"unsupported format version {version}")
    header = json.loads(blob[12 : 12 + header_len].decode())
    offset = 12 + header_len
    end = offset + header["payload_bytes"]
    if len(blob) < end:
        raise FormatError(f"payload size mismatch: expected {header['payload_bytes']} bytes, got {len(blob) - offset}")
    arrays = {}
    for entry in header["tensors"]:
        count = entry["count"]
        if int(np.prod(entry["shape"], dtype=np.int64)) != count:
            raise FormatError(f"count/shape mismatch for {entry['path']}")
        a = np.frombuffer(blob, dtype=_F32, count=count, offset=offset)
        arrays[entry["path"]] = a.astype(np.float32).reshape(entry["shape"])
        offset += count * 4
    if offset != end:
        raise FormatError("payload size mismatch between header counts and payload_bytes")
    trailer = json.loads(blob[end:].decode()) if len(blob) > end else None
    return arrays, trailer


def save(path: str | Path, arrays: Mapping[str, np.ndarray], trailer: dict | None = None) -> None:
    Path(path).write_bytes(dumps(arrays, trailer))


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict | None]:
    return loads(Path(path).read_bytes())
