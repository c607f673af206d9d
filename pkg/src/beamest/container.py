"""Binary tensor container: CRC-checked JSON header + little-endian payload.

File layout (all integers little-endian):

    bytes 0..3    magic "BTC1"
    bytes 4..7    format version (uint32, currently 1)
    bytes 8..15   header length in bytes (uint64)
    bytes 16..19  CRC32 of the header bytes (uint32)
    header        UTF-8 JSON: {"metadata": {...}, "tensors": [entry, ...]}
    payload       concatenated tensor bytes

Each tensor entry records name, dtype code, shape, offset and byte length
within the payload. Supported dtypes: <c16 (complex, stored as interleaved
real/imag float64 pairs), <f8, <i8, |u1. Round-trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"BTC1"
VERSION = 1
_DTYPES = {"<c16": np.dtype("<c16"), "<f8": np.dtype("<f8"),
           "<i8": np.dtype("<i8"), "|u1": np.dtype("|u1")}


def _dtype_code(arr: np.ndarray) -> str:
    for code, dt in _DTYPES.items():
        if arr.dtype == dt:
            return code
    raise ValueError(f"unsupported dtype {arr.dtype}; use one of {list(_DTYPES)}")


def save_container(path, tensors: dict[str, np.ndarray], metadata: dict | None = None):
    """Write named tensors plus a JSON-serializable metadata dict."""
    entries = []
    payloads = []
    offset = 0
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        code = _dtype_code(arr)
        data = arr.astype(_DTYPES[code], copy=False).tobytes()
        entries.append({"name": name, "dtype": code, "shape": list(arr.shape),
                        "offset": offset, "nbytes": len(data)})
        payloads.append(data)
        offset += len(data)

    header = json.dumps({"metadata": metadata or {}, "tensors": entries},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(struct.pack("<I", zlib.crc32(header)))
        fh.write(header)
        for data in payloads:
            fh.write(data)


def load_container(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (tensors, metadata); validates magic, version and checksum."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not a tensor container (bad magic)")
    version, = struct.unpack("<I", raw[4:8])
    if version != VERSION:
        raise ValueError(f"{path}: unsupported container version {version}")
    hlen, = struct.unpack("<Q", raw[8:16])
    crc, = struct.unpack("<I", raw[16:20])
    header = raw[20:20 + hlen]
    if zlib.crc32(header) != crc:
        raise ValueError(f"{path}: header checksum mismatch")
    meta = json.loads(header.decode("utf-8"))
    payload = raw[20 + hlen:]

    tensors = {}
    for e in meta["tensors"]:
        dt = _DTYPES[e["dtype"]]
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        if e["nbytes"] != n * dt.itemsize:
            raise ValueError(f"{path}: payload length mismatch for {e['name']}")
        buf = payload[e["offset"]:e["offset"] + e["nbytes"]]
        tensors[e["name"]] = np.frombuffer(buf, dtype=dt).reshape(e["shape"]).copy()
    return tensors, meta["metadata"]


__all__ = ["save_container", "load_container", "MAGIC", "VERSION"]
