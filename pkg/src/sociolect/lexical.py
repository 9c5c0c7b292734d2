"""User-level frequency tables and the five type-specificity scores.

Frequencies are distinct-user counts: a user contributes at most 1 to each
(community, token) cell no matter how often they repeat a word. PMI uses the
natural log; tf-idf uses base 10 for both factors; JSD uses base 2.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping

from .ingest import SENTINELS, CorpusSlice, is_punct_char

Token = Hashable  # str for type metrics, (str, int) for sense keys


class FrequencyTable:
    """Distinct-user counts per (community, token) plus derived totals."""

    def __init__(self) -> None:
        self.counts: dict[str, dict[Token, int]] = {}
        self.community_totals: dict[str, int] = {}
        self.global_counts: dict[Token, int] = {}
        self.grand_total: int = 0
        self.doc_freq: dict[Token, int] = {}

    @property
    def n_communities(self) -> int:
        return len(self.counts)

    def communities(self) -> list[str]:
        return sorted(self.counts)

    def f(self, community: str, token: Token) -> int:
        return self.counts.get(community, {}).get(token, 0)

    @classmethod
    def from_user_sets(cls, users: Mapping[str, Mapping[Token, set[str]]]) -> "FrequencyTable":
        table = cls()
        for community, per_token in users.items():
            if community in table.counts:
                raise ValueError(f"duplicate community {community!r}")
            cell = {tok: len(us) for tok, us in per_token.items() if us}
            table.counts[community] = cell
            total = sum(cell.values())
            table.community_totals[community] = total
            table.grand_total += total
            for tok, c in cell.items():
                table.global_counts[tok] = table.global_counts.get(tok, 0) + c
                table.doc_freq[tok] = table.doc_freq.get(tok, 0) + 1
        return table

    @classmethod
    def from_slices(cls, slices: Iterable[CorpusSlice]) -> "FrequencyTable":
        users: dict[str, dict[Token, set[str]]] = {}
        for sl in slices:
            if sl.community in users:
                raise ValueError(f"duplicate community {sl.community!r}")
            per_token: dict[Token, set[str]] = defaultdict(set)
            for comment in sl.comments:
                for tok in set(comment.tokens):
                    per_token[tok].add(comment.author)
            users[sl.community] = per_token
        return cls.from_user_sets(users)

    # probability accessors (raw maximum-likelihood, no smoothing)

    def p_token_given_community(self, community: str, token: Token) -> float:
        return self.f(community, token) / self.community_totals[community]

    def p_token(self, token: Token) -> float:
        return self.global_counts.get(token, 0) / self.grand_total

    def p_joint(self, community: str, token: Token) -> float:
        return self.f(community, token) / self.grand_total


def top_fraction_types(
    table: FrequencyTable,
    community: str,
    fraction: float,
    min_count: int = 0,
) -> set[Token]:
    """Most frequent ``fraction`` of a community's distinct types.

    Ties at the rank boundary are included; tokens below min_count dropped.
    """
    if community not in table.counts:
        raise KeyError(community)
    items = sorted(table.counts[community].items(), key=lambda kv: (-kv[1], str(kv[0])))
    if not items:
        return set()
    k = max(1, int(fraction * len(items)))
    boundary = items[min(k, len(items)) - 1][1]
    return {tok for tok, c in items if c >= boundary and c >= min_count}


def select_type_vocab(table: FrequencyTable, community: str,
                      fraction: float = 0.2, min_count: int = 10) -> set[Token]:
    """Scored vocabulary for type metrics: top 20% of types, at least 10 users."""
    return top_fraction_types(table, community, fraction, min_count)


def score_pmi_npmi(table: FrequencyTable, community: str, token: Token) -> tuple[float, float]:
    """Type PMI and NPMI of a token in a community.

    PMI = ln(P(t|s) / P(t)); NPMI divides by -ln P(t,s), landing in [-1, 1].
    """
    fst = table.f(community, token)
    if fst == 0:
        raise ValueError(f"{token!r} has no users in {community!r}; score undefined")
    p_cond = table.p_token_given_community(community, token)
    p_tok = table.p_token(token)
    p_joint = table.p_joint(community, token)
    pmi = math.log(p_cond / p_tok)
    denom = -math.log(p_joint)
    npmi = 1.0 if denom == 0.0 else pmi / denom
    return pmi, npmi


def score_tfidf(table: FrequencyTable, community: str, token: Token) -> float:
    """(1 + log10 f_s(t)) * log10(N / d(t)) over user counts."""
    fst = table.f(community, token)
    if fst == 0:
        raise ValueError(f"{token!r} has no users in {community!r}; score undefined")
    return (1.0 + math.log10(fst)) * math.log10(table.n_communities / table.doc_freq[token])


def background_probability(table: FrequencyTable, community: str, token: Token) -> float:
    """P(t | R_s): probability in the pool of all other communities."""
    bg_count = table.global_counts.get(token, 0) - table.f(community, token)
    bg_total = table.grand_total - table.community_totals[community]
    return bg_count / bg_total if bg_total > 0 else 0.0


def _plogp(v: float) -> float:
    return v * math.log2(v) if v > 0.0 else 0.0


def score_jsd(table: FrequencyTable, community: str, token: Token) -> float:
    """Per-token contribution to JSD(P_s || P_{R_s}), negative when the
    contribution comes from the background side (P(t|s) < P(t|R_s))."""
    p = table.p_token_given_community(community, token) if token in table.counts[community] else 0.0
    q = background_probability(table, community, token)
    if p == 0.0 and q == 0.0:
        raise ValueError(f"{token!r} absent from {community!r} and its background")
    m = (p + q) / 2.0
    val = -_plogp(m) + 0.5 * (_plogp(p) + _plogp(q))
    return -val if p < q else val


# --- TextRank ---

# Small shipped stopword list used only when no POS annotations are supplied.
STOPWORDS = frozenset("""
a about above after again all am an and any are as at be because been before
being below between both but by can could did do does doing down during each
few for from further had has have having he her here hers herself him himself
his how i if in into is it its itself just me more most my myself no nor not
now of off on once only or other our ours ourselves out over own same she
should so some such than that the their theirs them themselves then there
these they this those through to too under until up very was we were what
when where which while who whom why will with you your yours yourself
yourselves
""".split())

_ADJ_NOUN_PREFIXES = ("NN", "JJ")
_ADJ_NOUN_TAGS = frozenset({"ADJ", "NOUN", "A", "N"})


def _is_adj_or_noun(tag: str) -> bool:
    t = tag.upper()
    return t in _ADJ_NOUN_TAGS or t.startswith(_ADJ_NOUN_PREFIXES)


def _is_content_token(tok: str) -> bool:
    return tok not in SENTINELS and tok not in STOPWORDS \
        and not all(is_punct_char(ch) for ch in tok)


def _pagerank(adjacency: dict[str, set[str]], damping: float,
              tol: float, max_iter: int) -> dict[str, float]:
    nodes = sorted(adjacency)
    n = len(nodes)
    if n == 0:
        return {}
    score = {v: 1.0 / n for v in nodes}
    for _ in range(max_iter):
        dangling = sum(score[v] for v in nodes if not adjacency[v])
        base = (1.0 - damping) / n + damping * dangling / n
        nxt = {}
        for v in nodes:
            acc = 0.0
            for u in adjacency[v]:
                acc += score[u] / len(adjacency[u])
            nxt[v] = base + damping * acc
        delta = sum(abs(nxt[v] - score[v]) for v in nodes)
        score = nxt
        if delta < tol:
            break
    return score


def score_textrank(
    slice_: CorpusSlice,
    pos_tags: Mapping[str, list[str]] | None = None,
    damping: float = 0.85,
    tol: float = 1e-4,
    max_iter: int = 200,
) -> dict[str, float]:
    """PageRank keyword scores over a window-2 co-occurrence graph.

    Nodes are adjectives/nouns when a POS sidecar (comment_id -> tags aligned
    with tokens) is given, otherwise all content tokens; with a sidecar,
    comments it does not cover are left out of the graph rather than mixing
    the two filters. Edges connect tokens adjacent in the filtered sequence
    of a comment; the graph is unweighted, undirected and has no self-loops.
    Scores sum to 1 over nodes.
    """
    adjacency: dict[str, set[str]] = {}
    for comment in slice_.comments:
        if pos_tags is not None:
            tags = pos_tags.get(comment.comment_id)
            if tags is None:
                continue
            kept = [t for t, g in zip(comment.tokens, tags) if _is_adj_or_noun(g)]
        else:
            kept = [t for t in comment.tokens if _is_content_token(t)]
        for tok in kept:
            adjacency.setdefault(tok, set())
        for left, right in zip(kept, kept[1:]):
            if left != right:
                adjacency[left].add(right)
                adjacency[right].add(left)
    return _pagerank(adjacency, damping, tol, max_iter)


@dataclass(frozen=True)
class TypeScore:
    community: str
    token: str
    pmi: float
    npmi: float
    tfidf: float
    jsd: float
    textrank: float | None = None


def score_community_vocab(
    table: FrequencyTable,
    community: str,
    vocab: set[Token] | None = None,
    textrank_scores: Mapping[str, float] | None = None,
) -> list[TypeScore]:
    """All type scores for a community's scored vocabulary, token-sorted."""
    if vocab is None:
        vocab = select_type_vocab(table, community)
    out = []
    for token in sorted(vocab, key=str):
        pmi, npmi = score_pmi_npmi(table, community, token)
        out.append(TypeScore(
            community=community,
            token=str(token),
            pmi=pmi,
            npmi=npmi,
            tfidf=score_tfidf(table, community, token),
            jsd=score_jsd(table, community, token),
            textrank=textrank_scores.get(token) if textrank_scores else None,
        ))
    return out


def count_occurrences(slices: Iterable[CorpusSlice]) -> dict[str, int]:
    """Raw corpus-wide occurrence counts (not user counts)."""
    counts: dict[str, int] = defaultdict(int)
    for sl in slices:
        for comment in sl.comments:
            for tok in comment.tokens:
                counts[tok] += 1
    return dict(counts)
