"""``UTSCKPT v1`` checkpoint container.

Layout (all header lines UTF-8, ``\\n`` terminated)::

    UTSCKPT v1
    META <nbytes>            followed by <nbytes> of JSON and a newline
    SECTION params <count>
    <name> <dtype> <d0,d1,...> <nbytes>   followed by raw little-endian bytes and a newline
    ...
    SECTION adagrad <count>
    ...same record form...
    END

Records are written in sorted name order so that save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import io
import json
from pathlib import Path

import numpy as np

from .params import ParamStore

MAGIC = b"UTSCKPT v1\n"
_DTYPES = {"f4": np.dtype("<f4"), "f8": np.dtype("<f8")}
_TAGS = {np.dtype("float32"): "f4", np.dtype("float64"): "f8"}


class CheckpointError(ValueError):
    pass


def _write_records(buf: io.BytesIO, section: str, arrays: dict[str, np.ndarray]) -> None:
    buf.write(f"SECTION {section} {len(arrays)}\n".encode())
    for name in sorted(arrays):
        a = np.asarray(arrays[name])
        tag = _TAGS[a.dtype]
        raw = np.ascontiguousarray(a, dtype=_DTYPES[tag]).tobytes()
        shape = ",".join(str(d) for d in a.shape) or "-"
        buf.write(f"{name} {tag} {shape} {len(raw)}\n".encode())
        buf.write(raw)
        buf.write(b"\n")


def dumps(params: ParamStore, meta: dict | None = None) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    buf.write(f"META {len(meta_bytes)}\n".encode())
    buf.write(meta_bytes)
    buf.write(b"\n")
    _write_records(buf, "params", {n: t.data for n, t in params.items()})
    _write_records(buf, "adagrad", params.adagrad_accumulators)
    buf.write(b"END\n")
    return buf.getvalue()


def save(path, params: ParamStore, meta: dict | None = None) -> None:
    Path(path).write_bytes(dumps(params, meta))


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def line(self) -> str:
        end = self.data.find(b"\n", self.pos)
        if end < 0:
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos:end].decode()
        self.pos = end + 1
        return out

    def take(self, n: int) -> bytes:
        if self.pos + n + 1 > len(self.data):
            raise CheckpointError("truncated checkpoint payload")
        out = self.data[self.pos:self.pos + n]
        if self.data[self.pos + n:self.pos + n + 1] != b"\n":
            raise CheckpointError("record not newline-terminated")
        self.pos += n + 1
        return out


def _read_section(r: _Reader, expected: str) -> dict[str, np.ndarray]:
    parts = r.line().split()
    if len(parts) != 3 or parts[0] != "SECTION" or parts[1] != expected:
        raise CheckpointError(f"expected SECTION {expected}, got {' '.join(parts)!r}")
    out = {}
    for _ in range(int(parts[2])):
        name, tag, shape_s, nbytes = r.line().split(" ")
        if tag not in _DTYPES:
            raise CheckpointError(f"unknown dtype tag {tag!r}")
        shape = () if shape_s == "-" else tuple(int(d) for d in shape_s.split(","))
        raw = r.take(int(nbytes))
        arr = np.frombuffer(raw, dtype=_DTYPES[tag]).reshape(shape)
        out[name] = arr.astype(_DTYPES[tag].newbyteorder("="))
    return out


def loads(data: bytes) -> tuple[ParamStore, dict]:
    if not data.startswith(MAGIC):
        raise CheckpointError("missing UTSCKPT v1 header")
    r = _Reader(data)
    r.pos = len(MAGIC)
    head = r.line().split()
    if len(head) != 2 or head[0] != "META":
        raise CheckpointError("missing META record")
    meta = json.loads(r.take(int(head[1])).decode())
    values = _read_section(r, "params")
    accs = _read_section(r, "adagrad")
    if r.line() != "END":
        raise CheckpointError("missing END marker")
    if set(values) != set(accs):
        raise CheckpointError("param and accumulator name sets differ")
    dtypes = {v.dtype for v in values.values()}
    store = ParamStore(dtype=dtypes.pop() if len(dtypes) == 1 else np.float64)
    for name, v in values.items():
        store.add(name, v)
        store.adagrad_accumulators[name] = accs[name].copy()
    return store, meta


def load(path) -> tuple[ParamStore, dict]:
    return loads(Path(path).read_bytes())
