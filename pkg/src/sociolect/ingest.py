"""Comment ingestion: parsing raw dumps, text normalization, sampling, bot filtering."""

from __future__ import annotations

import json
import random
import re
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

NUM_TOKEN = "<num>"
USER_TOKEN = "<user>"
COMMUNITY_TOKEN = "<subreddit>"
SENTINELS = frozenset({NUM_TOKEN, USER_TOKEN, COMMUNITY_TOKEN})

# Maximal non-whitespace spans; stripped before lowercasing.
_URL_RE = re.compile(r"(?:https?://|www\.)\S+", re.IGNORECASE)
# Mention patterns are matched at chunk start, after lowercasing.
_USER_RE = re.compile(r"/?u/[a-z0-9_-]+")
_COMMUNITY_RE = re.compile(r"/?r/[a-z0-9_]+")
# Entirely digits plus optional sign and ./, separators.
_NUMERIC_RE = re.compile(r"[+-]?[0-9.,]*[0-9][0-9.,]*")

_DELETED_BODIES = frozenset({"", "[deleted]", "[removed]"})
_POST_PARENT_PREFIX = "t3_"
_COMMENT_PARENT_PREFIX = "t1_"

REQUIRED_FIELDS = ("id", "author", "subreddit", "body")


class ParseError(ValueError):
    """Raised in strict mode when a raw record cannot be parsed."""


@dataclass(frozen=True)
class Comment:
    """One normalized comment. ``tokens`` is the canonical token stream."""

    comment_id: str
    community: str
    author: str
    parent_id: str | None
    is_top_level: bool
    created_at: int
    tokens: tuple[str, ...]

    def parent_comment_id(self) -> str | None:
        """Bare id of the parent comment, or None for top-level comments."""
        if self.is_top_level or not self.parent_id:
            return None
        pid = self.parent_id
        if pid.startswith(_COMMENT_PARENT_PREFIX):
            return pid[len(_COMMENT_PARENT_PREFIX):]
        return pid


@dataclass
class CorpusSlice:
    community: str
    comments: list[Comment]
    sample_seed: int
    sample_size: int


@dataclass
class ParseCounters:
    parsed: int = 0
    skipped_deleted: int = 0
    errors: int = 0


def is_punct_char(ch: str) -> bool:
    return unicodedata.category(ch)[0] in ("P", "S")


def _scan_chunk(chunk: str) -> Iterator[str]:
    """Split one whitespace-delimited chunk into word/punct tokens.

    Punctuation and symbol characters become single-character tokens except
    for ``.``/``,`` between digits and a leading sign before a digit, which
    stay attached so amounts like ``3,500`` survive as one numeric token.
    """
    buf: list[str] = []
    buf_numeric = True  # whether buf so far could still be a numeric token
    n = len(chunk)
    i = 0
    while i < n:
        ch = chunk[i]
        if not is_punct_char(ch):
            if not ch.isdigit():
                buf_numeric = False
            buf.append(ch)
            i += 1
            continue
        nxt = chunk[i + 1] if i + 1 < n else ""
        if ch in ".," and buf and buf_numeric and buf[-1].isdigit() and nxt.isdigit():
            buf.append(ch)
            i += 1
            continue
        if ch in "+-" and not buf and nxt.isdigit():
            buf.append(ch)
            i += 1
            continue
        if buf:
            yield "".join(buf)
            buf = []
            buf_numeric = True
        yield ch
        i += 1
    if buf:
        yield "".join(buf)


def _tokenize_chunk(chunk: str) -> Iterator[str]:
    if chunk in SENTINELS:
        yield chunk
        return
    m = _USER_RE.match(chunk)
    if m:
        yield USER_TOKEN
        yield from _tokenize_chunk_rest(chunk[m.end():])
        return
    m = _COMMUNITY_RE.match(chunk)
    if m:
        yield COMMUNITY_TOKEN
        yield from _tokenize_chunk_rest(chunk[m.end():])
        return
    for tok in _scan_chunk(chunk):
        yield NUM_TOKEN if _NUMERIC_RE.fullmatch(tok) else tok


def _tokenize_chunk_rest(rest: str) -> Iterator[str]:
    if rest:
        for tok in _scan_chunk(rest):
            yield NUM_TOKEN if _NUMERIC_RE.fullmatch(tok) else tok


def normalize_and_tokenize(body: str) -> list[str]:
    """Canonical tokenization: URLs removed, lowercased, punctuation split,
    numbers/usernames/community names replaced with sentinel tokens.

    Total function; idempotent on its own space-joined output.
    """
    if not body:
        return []
    text = _URL_RE.sub(" ", body)
    text = text.lower()
    out: list[str] = []
    for chunk in text.split():
        out.extend(_tokenize_chunk(chunk))
    return out


def parse_comment_stream(
    lines: Iterable[str],
    counters: ParseCounters | None = None,
    strict: bool = False,
) -> Iterator[Comment]:
    """Parse line-delimited JSON records into Comments.

    Records with deleted/empty bodies are skipped and counted; malformed
    lines are skipped and counted too (strict mode aborts with the line
    number instead).
    """
    counters = counters if counters is not None else ParseCounters()
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            for f in REQUIRED_FIELDS:
                if f not in rec:
                    raise ValueError(f"missing field {f!r}")
            body = rec["body"]
            if body is None or body.strip() in _DELETED_BODIES:
                counters.skipped_deleted += 1
                continue
            parent_id = rec.get("parent_id") or None
            link_id = rec.get("link_id") or None
            if parent_id is None:
                top = True
            elif parent_id.startswith(_POST_PARENT_PREFIX):
                top = True
            elif parent_id.startswith(_COMMENT_PARENT_PREFIX):
                top = False
            else:
                top = link_id is not None and parent_id == link_id
            comment = Comment(
                comment_id=str(rec["id"]),
                community=str(rec["subreddit"]),
                author=str(rec["author"]),
                parent_id=parent_id,
                is_top_level=top,
                created_at=int(rec.get("created_utc") or 0),
                tokens=tuple(normalize_and_tokenize(body)),
            )
        except (ValueError, TypeError, KeyError) as exc:
            if strict:
                raise ParseError(f"line {line_no}: {exc}") from exc
            counters.errors += 1
            continue
        counters.parsed += 1
        yield comment


def sample_community(
    comments: Iterable[Comment],
    n: int,
    seed: int,
    community: str | None = None,
) -> CorpusSlice:
    """Uniform sample without replacement of min(n, total) comments.

    A pure function of the comment-id set and the seed: input order never
    changes the result.
    """
    if n <= 0:
        raise ValueError("sample size must be positive")
    ordered = sorted(comments, key=lambda c: c.comment_id)
    if community is None:
        if not ordered:
            raise ValueError("cannot infer community from an empty slice")
        community = ordered[0].community
    if len(ordered) > n:
        rng = random.Random(seed)
        ordered = sorted(rng.sample(ordered, n), key=lambda c: c.comment_id)
    return CorpusSlice(community=community, comments=ordered, sample_seed=seed, sample_size=n)


def context_window(comment: Comment, position: int, width: int = 5) -> tuple[str, ...]:
    """Tokens within ``width`` positions of the target, clipped at bounds."""
    lo = max(0, position - width)
    return tuple(comment.tokens[lo:position + width + 1])


def filter_bot_contexts(
    occurrences: list[tuple[Comment, int]],
    width: int = 5,
    max_repeats: int = 10,
) -> list[tuple[Comment, int]]:
    """Drop every occurrence whose context window repeats >= max_repeats times.

    Windows copied verbatim that many times are almost always bot output, so
    the whole repeated group is disregarded, not just the surplus.
    """
    counts = Counter(context_window(c, p, width) for c, p in occurrences)
    return [
        (c, p) for c, p in occurrences
        if counts[context_window(c, p, width)] < max_repeats
    ]


# --- canonical tokenized-corpus serialization (one JSON record per comment) ---

def comment_to_record(comment: Comment) -> dict:
    return {
        "id": comment.comment_id,
        "community": comment.community,
        "author": comment.author,
        "parent_id": comment.parent_id,
        "is_top_level": comment.is_top_level,
        "created_at": comment.created_at,
        "tokens": list(comment.tokens),
    }


def comment_from_record(rec: dict) -> Comment:
    return Comment(
        comment_id=rec["id"],
        community=rec["community"],
        author=rec["author"],
        parent_id=rec.get("parent_id"),
        is_top_level=bool(rec["is_top_level"]),
        created_at=int(rec.get("created_at") or 0),
        tokens=tuple(rec["tokens"]),
    )


def write_corpus(comments: Iterable[Comment], fh: IO[str]) -> int:
    n = 0
    for c in comments:
        fh.write(json.dumps(comment_to_record(c), sort_keys=True, ensure_ascii=False,
                            separators=(",", ":")))
        fh.write("\n")
        n += 1
    return n


def read_corpus(fh: IO[str]) -> Iterator[Comment]:
    for line in fh:
        if line.strip():
            yield comment_from_record(json.loads(line))


def group_by_community(comments: Iterable[Comment]) -> dict[str, list[Comment]]:
    out: dict[str, list[Comment]] = {}
    for c in comments:
        out.setdefault(c.community, []).append(c)
    return out
