"""Small shared helpers for deterministic artifact IO."""

from __future__ import annotations

import gzip
import json
from pathlib import Path
from typing import IO, Iterable, Iterator, Sequence


def fmt_float(v: float) -> str:
    """Stable short decimal rendering used in every delimited artifact."""
    return format(v, ".10g")


def write_tsv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence[object]],
    comment: str | None = None,
) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(
                fmt_float(v) if isinstance(v, float) else str(v) for v in row
            ) + "\n")


def read_tsv(path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh
                 if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path} is empty")
    header = lines[0].split("\t")
    return header, [ln.split("\t") for ln in lines[1:]]


def write_json(path: str | Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def open_text(path: str | Path) -> IO[str]:
    """Open a possibly gzip-compressed text file."""
    p = Path(path)
    if p.suffix == ".gz":
        return gzip.open(p, "rt", encoding="utf-8")
    return open(p, encoding="utf-8")


def iter_lines(path: str | Path) -> Iterator[str]:
    with open_text(path) as fh:
        yield from fh
