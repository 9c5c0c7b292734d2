"""Community-level sense statistics computed from sense assignments.

Sense NPMI reuses the type-metric algebra over (token, sense_id) keys with
distinct-user counts, so values are directly comparable to type NPMI.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Mapping

from .lexical import FrequencyTable, score_pmi_npmi
from .wsi import Occurrence

SenseKey = tuple[str, int]  # (token, sense_id)


def count_sense_users(assignments: Mapping[Occurrence, int]) -> FrequencyTable:
    """Distinct-user counts per (community, sense); one vote per user per cell."""
    users: dict[str, dict[SenseKey, set[str]]] = defaultdict(lambda: defaultdict(set))
    for occ, sense in assignments.items():
        users[occ.community][(occ.token, int(sense))].add(occ.user)
    return FrequencyTable.from_user_sets(users)


def sense_npmi(table: FrequencyTable, community: str, sense: SenseKey) -> float:
    """NPMI of one sense in one community, in [-1, 1]."""
    return score_pmi_npmi(table, community, sense)[1]


@dataclass(frozen=True)
class SenseScore:
    community: str
    token: str
    method: str
    dominant_sense: int
    value: float


def dominant_sense(table: FrequencyTable, community: str, token: str) -> int:
    """Modal sense of a token in a community by user count.

    Ties go to the sense with more users globally, then the lower sense id.
    """
    cell = table.counts.get(community, {})
    local = {key[1]: c for key, c in cell.items()
             if isinstance(key, tuple) and key[0] == token}
    if not local:
        raise ValueError(f"{token!r} has no assigned occurrences in {community!r}")
    return min(local, key=lambda n: (-local[n],
                                     -table.global_counts.get((token, n), 0), n))


def word_sense_specificity(
    table: FrequencyTable,
    community: str,
    token: str,
    method: str,
) -> SenseScore:
    """Sense NPMI of the token's dominant sense in the community."""
    dom = dominant_sense(table, community, token)
    return SenseScore(
        community=community,
        token=token,
        method=method,
        dominant_sense=dom,
        value=sense_npmi(table, community, (token, dom)),
    )


def score_all(assignments: Mapping[Occurrence, int], method: str) -> list[SenseScore]:
    """Word sense specificity for every (community, token) with assignments."""
    table = count_sense_users(assignments)
    pairs = sorted({(occ.community, occ.token) for occ in assignments})
    return [word_sense_specificity(table, community, token, method)
            for community, token in pairs]


def assignments_by_token(assignments: Mapping[Occurrence, int]) -> dict[str, dict[Occurrence, int]]:
    out: dict[str, dict[Occurrence, int]] = defaultdict(dict)
    for occ, sense in assignments.items():
        out[occ.token][occ] = sense
    return dict(out)
