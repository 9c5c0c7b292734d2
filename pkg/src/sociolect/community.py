"""Per-community behavioral attributes and the language-distinctiveness fraction."""

from __future__ import annotations

import random
from collections import Counter, defaultdict, deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .ingest import Comment


@dataclass
class ReplyGraph:
    """Simple undirected graph over users; an edge means one replied to the other."""

    nodes: set[str]
    edges: set[tuple[str, str]]  # pairs stored sorted

    def adjacency(self) -> dict[str, set[str]]:
        adj: dict[str, set[str]] = {v: set() for v in self.nodes}
        for u, v in self.edges:
            adj[u].add(v)
            adj[v].add(u)
        return adj


@dataclass
class CommunityProfile:
    community: str
    size: int
    activity: float
    loyalty: float | None
    density: float
    distinctiveness: float
    type_fraction: float
    sense_fraction: float
    topic_flag: int | None = None


def compute_user_stats(comments: Sequence[Comment]) -> tuple[int, float]:
    """(distinct commenters, mean comments per user) over unsampled comments."""
    authors = {c.author for c in comments}
    if not authors:
        raise ValueError("no comments")
    return len(authors), len(comments) / len(authors)


def compute_loyalty(
    comments: Iterable[Comment],
    min_top_level: int = 10,
    threshold: float = 0.5,
) -> dict[str, float | None]:
    """Fraction of a community's eligible users who are loyal to it.

    Only top-level comments count. Users with fewer than ``min_top_level``
    top-level comments are excluded; a user is loyal to the community holding
    at least half of their top-level comments. The denominator is every
    eligible user who top-level commented in the community at least once.
    """
    per_user: dict[str, Counter] = defaultdict(Counter)
    communities: set[str] = set()
    for c in comments:
        communities.add(c.community)
        if c.is_top_level:
            per_user[c.author][c.community] += 1
    eligible: dict[str, set[str]] = defaultdict(set)   # community -> users
    loyal: dict[str, set[str]] = defaultdict(set)
    for user, counts in per_user.items():
        total = sum(counts.values())
        if total < min_top_level:
            continue
        for community, n in counts.items():
            eligible[community].add(user)
            if n / total >= threshold:
                loyal[community].add(user)
    out: dict[str, float | None] = {}
    for community in communities:
        users = eligible.get(community)
        out[community] = len(loyal.get(community, set())) / len(users) if users else None
    return out


def top_users(comments: Sequence[Comment], fraction: float = 0.2) -> set[str]:
    """Most active ``fraction`` of users by comment count; boundary ties kept."""
    counts = Counter(c.author for c in comments)
    if not counts:
        return set()
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    k = max(1, int(fraction * len(ranked)))
    boundary = ranked[k - 1][1]
    return {u for u, n in ranked if n >= boundary}


def build_reply_network(comments: Sequence[Comment], top_fraction: float = 0.2) -> ReplyGraph:
    """Direct-reply graph restricted to the community's most active users."""
    retained = top_users(comments, top_fraction)
    author_of = {c.comment_id: c.author for c in comments}
    edges: set[tuple[str, str]] = set()
    for c in comments:
        if c.author not in retained:
            continue
        parent = c.parent_comment_id()
        if parent is None:
            continue
        other = author_of.get(parent)
        if other is None or other == c.author or other not in retained:
            continue
        edges.add((min(c.author, other), max(c.author, other)))
    return ReplyGraph(nodes=set(retained), edges=edges)


def network_density(graph: ReplyGraph) -> float:
    n = len(graph.nodes)
    if n <= 1:
        return 0.0
    return 2.0 * len(graph.edges) / (n * (n - 1))


def _bfs_distances(adj: Mapping[str, set[str]], source: str) -> dict[str, int]:
    dist = {source: 0}
    queue = deque([source])
    while queue:
        u = queue.popleft()
        for v in adj[u]:
            if v not in dist:
                dist[v] = dist[u] + 1
                queue.append(v)
    return dist


def connected_components(adj: Mapping[str, set[str]]) -> list[set[str]]:
    seen: set[str] = set()
    comps = []
    for v in sorted(adj):
        if v in seen:
            continue
        comp = set(_bfs_distances(adj, v))
        seen |= comp
        comps.append(comp)
    return comps


def approx_closeness(
    graph: ReplyGraph,
    eps: float = 1e-7,
    pivots: int = 5000,
    seed: int = 0,
) -> dict[str, float]:
    """Closeness centrality (n-1) / sum of distances, within components.

    Components no larger than ``pivots`` use every node as a pivot, which is
    exact BFS; larger components estimate the distance sum from a uniform
    pivot sample. ``eps`` is recorded for parity with the approximation's
    usual accuracy knob but exactness is driven by the pivot count here.
    """
    del eps
    adj = graph.adjacency()
    centrality = {v: 0.0 for v in graph.nodes}
    rng = random.Random(seed)
    for comp in connected_components(adj):
        m = len(comp)
        if m <= 1:
            continue
        members = sorted(comp)
        chosen = members if m <= pivots else sorted(rng.sample(members, pivots))
        sums: dict[str, float] = defaultdict(float)
        for pivot in chosen:
            for v, d in _bfs_distances(adj, pivot).items():
                sums[v] += d
        scale = m / len(chosen)
        for v in members:
            total = sums[v] * scale
            centrality[v] = (m - 1) / total if total > 0 else 0.0
    return centrality


def distinctiveness_F(
    vocab: Iterable[str],
    type_scores: Mapping[str, float],
    sense_scores: Mapping[str, float],
    type_cutoff: float,
    sense_cutoff: float,
) -> tuple[float, float, float]:
    """(F, type fraction, sense fraction) over a community's scored vocabulary.

    A word is community-specific when its type NPMI or its sense NPMI clears
    the pooled percentile cutoff; the union is counted once.
    """
    words = sorted(set(vocab))
    if not words:
        return 0.0, 0.0, 0.0
    n_type = sum(1 for w in words if type_scores.get(w, float("-inf")) > type_cutoff)
    n_sense = sum(1 for w in words if sense_scores.get(w, float("-inf")) > sense_cutoff)
    n_union = sum(
        1 for w in words
        if type_scores.get(w, float("-inf")) > type_cutoff
        or sense_scores.get(w, float("-inf")) > sense_cutoff
    )
    n = len(words)
    return n_union / n, n_type / n, n_sense / n


def user_specific_word_prob(
    comments: Sequence[Comment],
    user: str,
    specific_words: set[str],
) -> float:
    """Fraction of the user's comments containing a community-specific word."""
    mine = [c for c in comments if c.author == user]
    if not mine:
        raise ValueError(f"user {user!r} has no comments here")
    hits = sum(1 for c in mine if any(t in specific_words for t in c.tokens))
    return hits / len(mine)


def topic_flag(topic: str | None, high_distinctiveness_topics: Iterable[str]) -> int | None:
    if topic is None:
        return None
    return 1 if topic in set(high_distinctiveness_topics) else 0
