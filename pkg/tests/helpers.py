"""Shared fixture builders and small independent oracles used across tests."""

from __future__ import annotations

import json
import random

import numpy as np

from sociolect.ingest import Comment, CorpusSlice
from sociolect.lexical import FrequencyTable
from sociolect.wsi import Occurrence


def make_comment(comment_id, community="c", author="u", tokens=(),
                 parent_id=None, top=True, created=0):
    return Comment(comment_id=comment_id, community=community, author=author,
                   parent_id=parent_id, is_top_level=top, created_at=created,
                   tokens=tuple(tokens))


def slice_from_texts(community, texts, authors=None, prefix=None):
    """One comment per (author, text) pair, tokens pre-split on spaces."""
    prefix = prefix or community
    comments = []
    for i, text in enumerate(texts):
        author = authors[i] if authors else f"{community}_u{i}"
        comments.append(make_comment(f"{prefix}{i:04d}", community, author,
                                     text.split()))
    return CorpusSlice(community=community, comments=comments,
                       sample_seed=0, sample_size=len(comments))


def table_from_counts(spec):
    """Build a FrequencyTable from {community: {token: n_users}} by inventing
    one pseudo-user per count unit."""
    users = {
        s: {t: {f"{s}_{t}_{i}" for i in range(n)} for t, n in tokens.items()}
        for s, tokens in spec.items()
    }
    return FrequencyTable.from_user_sets(users)


# the 2-community hand fixture used throughout: A:{x:3, y:1}, B:{y:2, z:2}
def hand_table():
    return table_from_counts({"A": {"x": 3, "y": 1}, "B": {"y": 2, "z": 2}})


def make_occurrence(token, i, community="c", user=None):
    return Occurrence(token=token, community=community, comment_id=f"m{i:05d}",
                      position=0, user=user or f"user{i}")


def blob_embeddings(token, centers, counts, dim, sigma=1.0, seed=0,
                    community="c", users=None):
    """Planted Gaussian blobs: returns (entries, true_labels)."""
    rng = np.random.default_rng(seed)
    entries = {}
    labels = {}
    i = 0
    for blob, (center, count) in enumerate(zip(centers, counts)):
        for _ in range(count):
            occ = Occurrence(token=token, community=community,
                             comment_id=f"m{i:05d}", position=0,
                             user=users[i] if users else f"user{i}")
            entries[occ] = rng.normal(0.0, sigma, dim) + center
            labels[occ] = blob
            i += 1
    return entries, labels


def adjusted_rand(labels_a, labels_b):
    """Independent ARI oracle (contingency formula)."""
    from collections import Counter, defaultdict

    pairs = defaultdict(int)
    ca, cb = Counter(), Counter()
    n = 0
    for a, b in zip(labels_a, labels_b):
        pairs[(a, b)] += 1
        ca[a] += 1
        cb[b] += 1
        n += 1
    comb = lambda x: x * (x - 1) // 2
    sum_ij = sum(comb(v) for v in pairs.values())
    sum_a = sum(comb(v) for v in ca.values())
    sum_b = sum(comb(v) for v in cb.values())
    total = comb(n)
    expected = sum_a * sum_b / total
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return (sum_ij - expected) / (max_index - expected)


def pagerank_oracle(adjacency, damping=0.85, iterations=500):
    """Dense power-iteration PageRank with uniform dangling redistribution."""
    nodes = sorted(adjacency)
    n = len(nodes)
    idx = {v: i for i, v in enumerate(nodes)}
    M = np.zeros((n, n))
    for v, neigh in adjacency.items():
        for u in neigh:
            M[idx[v], idx[u]] = 1.0 / len(adjacency[u])
    dangling = np.array([1.0 if not adjacency[v] else 0.0 for v in nodes])
    r = np.full(n, 1.0 / n)
    for _ in range(iterations):
        r = (1 - damping) / n + damping * (M @ r + (dangling @ r) / n)
    return {v: r[idx[v]] for v in nodes}


def raw_record(comment_id, community, author, body, parent_id="t3_post1",
               link_id="t3_post1", created=1_558_000_000):
    return json.dumps({
        "id": comment_id, "subreddit": community, "author": author,
        "body": body, "parent_id": parent_id, "link_id": link_id,
        "created_utc": created,
    })


def toy_raw_corpus(path, n_communities=3, comments_per_community=1000,
                   users_per_community=40, seed=7):
    """Synthetic raw dump with planted per-community jargon.

    Shared vocabulary is Zipf-ish across all communities; each community also
    gets 4 exclusive jargon words sprinkled into ~30% of its comments plus a
    shared polysemy probe word 'poly' in ~35%. Returns (community names,
    {community: jargon words}).
    """
    rng = random.Random(seed)
    shared = [f"w{i}" for i in range(120)]
    weights = [1.0 / (i + 1) for i in range(len(shared))]
    communities = [f"comm{k}" for k in range(n_communities)]
    jargon = {name: [f"{name}jarg{j}" for j in range(4)] for name in communities}
    lines = []
    for k, name in enumerate(communities):
        # distinct sizes so community attributes are non-constant
        users = [f"{name}_user{i}" for i in range(users_per_community + 10 * k)]
        last_by_user = {}
        for i in range(comments_per_community):
            author = rng.choice(users)
            words = rng.choices(shared, weights=weights, k=rng.randint(8, 14))
            if rng.random() < 0.30:
                words.insert(rng.randrange(len(words)), rng.choice(jargon[name]))
            if rng.random() < 0.35:
                words.insert(rng.randrange(len(words)), "poly")
            cid = f"{name}c{i:05d}"
            if rng.random() < 0.6 or not last_by_user:
                parent, link = "t3_post1", "t3_post1"
            else:
                target = rng.choice(sorted(last_by_user.values()))
                parent, link = f"t1_{target}", "t3_post1"
            lines.append(raw_record(cid, name, author, " ".join(words),
                                    parent_id=parent, link_id=link))
            last_by_user[author] = cid
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    return communities, jargon
