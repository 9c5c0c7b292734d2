"""User-created glossaries and how metric rankings treat their terms."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

from .ingest import normalize_and_tokenize


@dataclass
class Glossary:
    community: str
    terms: set[str] = field(default_factory=set)
    definitions: dict[str, str] = field(default_factory=dict)
    dropped_multiword: int = 0
    missing_from_corpus: set[str] = field(default_factory=set)


def load_glossaries(
    fh: IO[str],
    corpus_tokens: Mapping[str, set[str]] | None = None,
) -> dict[str, Glossary]:
    """Read TSV rows (community, term, optional definition).

    Terms are lowercased through the canonical tokenizer; entries that do not
    reduce to a single token are dropped and counted. When corpus vocabularies
    are supplied, terms absent from their community (exact string match) are
    flagged instead of removed.
    """
    glossaries: dict[str, Glossary] = {}
    for line in fh:
        line = line.rstrip("\n")
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            continue
        community, raw_term = parts[0], parts[1]
        definition = parts[2] if len(parts) > 2 else ""
        gloss = glossaries.setdefault(community, Glossary(community=community))
        tokens = normalize_and_tokenize(raw_term)
        if len(tokens) != 1:
            gloss.dropped_multiword += 1
            continue
        term = tokens[0]
        gloss.terms.add(term)
        if definition and term not in gloss.definitions:
            gloss.definitions[term] = definition
    if corpus_tokens is not None:
        for community, gloss in glossaries.items():
            present = corpus_tokens.get(community, set())
            gloss.missing_from_corpus = {t for t in gloss.terms if t not in present}
    return glossaries


def rank_of(scores: Mapping[str, float], token: str) -> int:
    """Competition rank: 1 + number of strictly higher scores; ties share it."""
    mine = scores[token]
    return 1 + sum(1 for v in scores.values() if v > mine)


def best_glossary_rank(scores: Mapping[str, float], terms: Iterable[str]) -> int | None:
    scored = [t for t in terms if t in scores]
    if not scored:
        return None
    return min(rank_of(scores, t) for t in scored)


def glossary_mrr(
    scores_by_community: Mapping[str, Mapping[str, float]],
    glossaries: Mapping[str, Glossary],
) -> float:
    """Mean over glossaried communities of 1 / best rank of a glossary term.

    Communities whose glossary terms are all unscored contribute 0.
    """
    if not glossaries:
        raise ValueError("no glossaries")
    total = 0.0
    for community, gloss in glossaries.items():
        scores = scores_by_community.get(community, {})
        rank = best_glossary_rank(scores, gloss.terms)
        if rank is not None:
            total += 1.0 / rank
    return total / len(glossaries)


@dataclass(frozen=True)
class CoverageReport:
    median_glossary: float
    median_non_glossary: float
    pct_above_cutoff: float
    n_glossary_scored: int
    n_non_glossary_scored: int


def glossary_coverage(
    scores_by_community: Mapping[str, Mapping[str, float]],
    glossaries: Mapping[str, Glossary],
    cutoff: float,
) -> CoverageReport:
    """Medians of scored glossary vs non-glossary words over glossaried
    communities, plus the share of scored glossary words above the cutoff."""
    gloss_vals: list[float] = []
    other_vals: list[float] = []
    for community, gloss in glossaries.items():
        scores = scores_by_community.get(community)
        if not scores:
            continue
        for token, value in scores.items():
            (gloss_vals if token in gloss.terms else other_vals).append(value)
    if not gloss_vals:
        raise ValueError("no scored glossary words")
    pct = 100.0 * sum(1 for v in gloss_vals if v > cutoff) / len(gloss_vals)
    return CoverageReport(
        median_glossary=statistics.median(gloss_vals),
        median_non_glossary=statistics.median(other_vals) if other_vals else float("nan"),
        pct_above_cutoff=pct,
        n_glossary_scored=len(gloss_vals),
        n_non_glossary_scored=len(other_vals),
    )


def suggest_terms(
    scores_by_community: Mapping[str, Mapping[str, float]],
    glossaries: Mapping[str, Glossary],
    cutoff: float,
    limit: int = 20,
) -> dict[str, list[tuple[str, float]]]:
    """High-scoring non-glossary words: candidate glossary additions."""
    out: dict[str, list[tuple[str, float]]] = {}
    for community, gloss in sorted(glossaries.items()):
        scores = scores_by_community.get(community, {})
        candidates = [(t, v) for t, v in scores.items()
                      if v > cutoff and t not in gloss.terms]
        candidates.sort(key=lambda tv: (-tv[1], tv[0]))
        out[community] = candidates[:limit]
    return out
