"""Binary shard formats for per-occurrence representations.

Both formats are little-endian and carry their strings in a footer of four
length-prefixed tables (tokens, communities, comments, users). Record fields
reference those tables by index.

EmbeddingShard (contextual vectors)::

    header  magic b"EMBS" | version u32 | dim u32 | count u64 | footer offset u64
    record  token u32 | community u32 | comment u64 | position u32 | user u32
            | dim x f32
    footer  4 tables, each: count u64, then per string (byte length u32, utf-8)

RepresentativeShard (substitute multisets)::

    header  magic b"REPS" | version u32 | n_reps u32 | n_subs u32 | count u64
            | footer offset u64
    record  same key fields, then n_reps * n_subs substitute token ids (u32)

Substitute ids point into the same token table as target tokens.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .wsi import N_REPRESENTATIVES, N_SUBSTITUTES, Occurrence

EMBEDDING_MAGIC = b"EMBS"
REPRESENTATIVE_MAGIC = b"REPS"
FORMAT_VERSION = 1

_EMB_HEADER = struct.Struct("<4sIIQQ")
_REP_HEADER = struct.Struct("<4sIIIQQ")
_KEY = struct.Struct("<IIQII")


class ShardFormatError(ValueError):
    pass


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


def _read_table(fh: IO[bytes]) -> list[str]:
    (count,) = struct.unpack("<Q", fh.read(8))
    out = []
    for _ in range(count):
        (length,) = struct.unpack("<I", fh.read(4))
        out.append(fh.read(length).decode("utf-8"))
    return out


def _write_records(fh, entries, tables, payload_writer) -> int:
    tokens, communities, comments, users = tables
    count = 0
    for occ in sorted(entries):
        fh.write(_KEY.pack(
            tokens.add(occ.token),
            communities.add(occ.community),
            comments.add(occ.comment_id),
            occ.position,
            users.add(occ.user),
        ))
        payload_writer(fh, entries[occ])
        count += 1
    return count


def write_embedding_shard(
    entries: Mapping[Occurrence, Sequence[float]],
    path: str | Path,
    dim: int | None = None,
) -> None:
    if not entries:
        if dim is None:
            raise ValueError("dim is required for an empty shard")
    else:
        first = next(iter(entries.values()))
        inferred = len(first)
        if dim is None:
            dim = inferred
        elif dim != inferred:
            raise ValueError(f"dim mismatch: {dim} != {inferred}")
    tables = (_StringTable(), _StringTable(), _StringTable(), _StringTable())

    def payload(fh, vec):
        arr = np.asarray(vec, dtype="<f4")
        if arr.shape != (dim,):
            raise ValueError(f"vector of shape {arr.shape}, expected ({dim},)")
        if not np.isfinite(arr).all():
            raise ValueError("embedding vectors must be finite")
        fh.write(arr.tobytes())

    with open(path, "wb") as fh:
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, dim, 0, 0))
        count = _write_records(fh, entries, tables, payload)
        footer = fh.tell()
        for table in tables:
            table.dump(fh)
        fh.seek(0)
        fh.write(_EMB_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, dim, count, footer))


def read_embedding_shard(path: str | Path) -> tuple[dict[Occurrence, np.ndarray], int]:
    """Returns (entries, dim)."""
    with open(path, "rb") as fh:
        header = fh.read(_EMB_HEADER.size)
        if len(header) < _EMB_HEADER.size:
            raise ShardFormatError("truncated header")
        magic, version, dim, count, footer = _EMB_HEADER.unpack(header)
        if magic != EMBEDDING_MAGIC:
            raise ShardFormatError(f"bad magic {magic!r}; not an embedding shard")
        if version != FORMAT_VERSION:
            raise ShardFormatError(f"unsupported version {version}")
        body = fh.read(footer - _EMB_HEADER.size)
        tokens = _read_table(fh)
        communities = _read_table(fh)
        comments = _read_table(fh)
        users = _read_table(fh)
    record = _KEY.size + 4 * dim
    if len(body) != count * record:
        raise ShardFormatError("record section length mismatch")
    entries: dict[Occurrence, np.ndarray] = {}
    for i in range(count):
        off = i * record
        tok, comm, cid, pos, user = _KEY.unpack_from(body, off)
        vec = np.frombuffer(body, dtype="<f4", count=dim, offset=off + _KEY.size)
        occ = Occurrence(tokens[tok], communities[comm], comments[cid], pos, users[user])
        entries[occ] = vec.astype(np.float64)
    return entries, dim


def write_representative_shard(
    entries: Mapping[Occurrence, Sequence[Sequence[str]]],
    path: str | Path,
    n_reps: int = N_REPRESENTATIVES,
    n_subs: int = N_SUBSTITUTES,
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
        fh.write(_REP_HEADER.pack(REPRESENTATIVE_MAGIC, FORMAT_VERSION, n_reps, n_subs, 0, 0))
        count = _write_records(fh, entries, tables, payload)
        footer = fh.tell()
        for table in tables:
            table.dump(fh)
        fh.seek(0)
        fh.write(_REP_HEADER.pack(REPRESENTATIVE_MAGIC, FORMAT_VERSION,
                                  n_reps, n_subs, count, footer))


def read_representative_shard(path: str | Path) -> dict[Occurrence, list[list[str]]]:
    with open(path, "rb") as fh:
        header = fh.read(_REP_HEADER.size)
        if len(header) < _REP_HEADER.size:
            raise ShardFormatError("truncated header")
        magic, version, n_reps, n_subs, count, footer = _REP_HEADER.unpack(header)
        if magic != REPRESENTATIVE_MAGIC:
            raise ShardFormatError(f"bad magic {magic!r}; not a representative shard")
        if version != FORMAT_VERSION:
            raise ShardFormatError(f"unsupported version {version}")
        body = fh.read(footer - _REP_HEADER.size)
        tokens = _read_table(fh)
        communities = _read_table(fh)
        comments = _read_table(fh)
        users = _read_table(fh)
    per = n_reps * n_subs
    record = _KEY.size + 4 * per
    if len(body) != count * record:
        raise ShardFormatError("record section length mismatch")
    sub_struct = struct.Struct(f"<{per}I")
    entries: dict[Occurrence, list[list[str]]] = {}
    for i in range(count):
        off = i * record
        tok, comm, cid, pos, user = _KEY.unpack_from(body, off)
        flat = sub_struct.unpack_from(body, off + _KEY.size)
        reps = [[tokens[j] for j in flat[r * n_subs:(r + 1) * n_subs]]
                for r in range(n_reps)]
        occ = Occurrence(tokens[tok], communities[comm], comments[cid], pos, users[user])
        entries[occ] = reps
    return entries


def sniff_shard_kind(path: str | Path) -> str:
    """'embedding' or 'representative', from the magic bytes."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
    if magic == EMBEDDING_MAGIC:
        return "embedding"
    if magic == REPRESENTATIVE_MAGIC:
        return "representative"
    raise ShardFormatError(f"unknown shard magic {magic!r}")


def load_shards(paths: Iterable[str | Path]) -> tuple[dict[Occurrence, object], str]:
    """Merge several shards of one kind; duplicate occurrence keys are errors."""
    merged: dict[Occurrence, object] = {}
    kind: str | None = None
    for path in sorted(str(p) for p in paths):
        this_kind = sniff_shard_kind(path)
        if kind is None:
            kind = this_kind
        elif kind != this_kind:
            raise ShardFormatError("cannot mix embedding and representative shards")
        entries = (read_embedding_shard(path)[0] if this_kind == "embedding"
                   else read_representative_shard(path))
        for occ in entries:
            if occ in merged:
                raise ShardFormatError(f"duplicate occurrence across shards: {occ}")
        merged.update(entries)
    if kind is None:
        raise ShardFormatError("no shard files given")
    return merged, kind
