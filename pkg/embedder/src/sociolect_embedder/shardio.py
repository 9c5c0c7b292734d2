"""Writers for the binary shard formats consumed by the analysis pipeline.

The layout is the pipeline's documented external interface; this module
implements it independently so the sidecar stays self-contained.

Little-endian throughout. Strings live in a footer of four length-prefixed
tables (tokens, communities, comments, users); each table is a u64 count
followed by (u32 byte length, utf-8 bytes) entries. Record key fields index
into those tables.

EmbeddingShard:
    header  magic b"EMBS" | version u32 | dim u32 | count u64 | footer u64
    record  token u32 | community u32 | comment u64 | position u32 | user u32
            | dim x f32

RepresentativeShard:
    header  magic b"REPS" | version u32 | n_reps u32 | n_subs u32 | count u64
            | footer u64
    record  same key fields, then n_reps * n_subs substitute token ids (u32)
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import IO, Mapping, NamedTuple, Sequence

import numpy as np

EMBEDDING_MAGIC = b"EMBS"
REPRESENTATIVE_MAGIC = b"REPS"
FORMAT_VERSION = 1

_EMB_HEADER = struct.Struct("<4sIIQQ")
_REP_HEADER = struct.Struct("<4sIIIQQ")
_KEY = struct.Struct("<IIQII")


class OccurrenceKey(NamedTuple):
    token: str
    community: str
    comment_id: str
    position: int
    user: str


class _StringTable:
    def __init__(self) -> None:
        self._index: dict[str, int] = {}
        self._items: list[str] = []

    def add(self, value: str) -> int:
        idx = self._index.get(value)
        if idx is None:
            idx = len(self._items)
            self._index[value] = idx
            self._items.append(value)
        return idx

    def dump(self, fh: IO[bytes]) -> None:
        fh.write(struct.pack("<Q", len(self._items)))
        for item in self._items:
            raw = item.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)


def _write_keyed_records(fh, entries, tables, payload) -> int:
    tokens, communities, comments, users = tables
    count = 0
    for key in sorted(entries):
        fh.write(_KEY.pack(
            tokens.add(key.token),
            communities.add(key.community),
            comments.add(key.comment_id),
            key.position,
            users.add(key.user),
        ))
        payload(fh, entries[key])
        count += 1
    return count


def write_embedding_shard(
    entries: Mapping[OccurrenceKey, Sequence[float]],
    path: str | Path,
    dim: int,
) -> None:
    tables = (_StringTable(), _StringTable(), _StringTable(), _StringTable())

    def payload(fh, vec):
        arr = np.asarray(vec, dtype="<f4")
        if arr.shape != (dim,):
            raise ValueError(f"vector shape {arr.shape}, expected ({dim},)")
        if not np.isfinite(arr).all():
            raise ValueError("embedding vectors must be finite")
        fh.write(arr.tobytes())

    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, dim, 0, 0))
        count = _write_keyed_records(fh, entries, tables, payload)
        footer = fh.tell()
        for table in tables:
            table.dump(fh)
        fh.seek(0)
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, dim, count, footer))


def write_representative_shard(
    entries: Mapping[OccurrenceKey, Sequence[Sequence[str]]],
    path: str | Path,
    n_reps: int = 15,
    n_subs: int = 20,
) -> None:
    tables = (_StringTable(), _StringTable(), _StringTable(), _StringTable())
    tokens = tables[0]

    def payload(fh, reps):
        reps = list(reps)
        if len(reps) != n_reps:
            raise ValueError(f"expected {n_reps} representatives, got {len(reps)}")
        ids = []
        for rep in reps:
            subs = list(rep)
            if len(subs) != n_subs:
                raise ValueError(f"expected {n_subs} substitutes per representative")
            ids.extend(tokens.add(s) for s in subs)
        fh.write(struct.pack(f"<{n_reps * n_subs}I", *ids))

    with open(path, "wb") as fh:
        fh.write(_REP_HEADER.pack(REPRESENTATIVE_MAGIC, FORMAT_VERSION,
                                  n_reps, n_subs, 0, 0))
        count = _write_keyed_records(fh, entries, tables, payload)
        footer = fh.tell()
        for table in tables:
            table.dump(fh)
        fh.seek(0)
        fh.write(_REP_HEADER.pack(REPRESENTATIVE_MAGIC, FORMAT_VERSION,
                                  n_reps, n_subs, count, footer))
