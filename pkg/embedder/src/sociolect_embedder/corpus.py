"""Reader for the canonical tokenized corpus (line-delimited JSON records).

Each record carries {id, community, author, parent_id, is_top_level,
created_at, tokens}; only the fields needed for shard keys are kept here.
"""

from __future__ import annotations

import gzip
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator


@dataclass(frozen=True)
class CorpusComment:
    comment_id: str
    community: str
    author: str
    tokens: tuple[str, ...]


def read_corpus(path: str | Path) -> Iterator[CorpusComment]:
    p = Path(path)
    opener = gzip.open if p.suffix == ".gz" else open
    with opener(p, "rt", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            yield CorpusComment(
                comment_id=rec["id"],
                community=rec["community"],
                author=rec["author"],
                tokens=tuple(rec["tokens"]),
            )


def load_vocab(path: str | Path) -> set[str]:
    """One target token per line; blank lines and # comments ignored."""
    out = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                out.add(line)
    return out
