"""Word sense induction from per-occurrence representations.

Three back-ends over the same train/match protocol:

* k-means over contextual embeddings, cluster count k chosen by minimizing
  RSS(k) + gamma * k; matching by cosine similarity to centroids.
* spectral clustering over a symmetric K-nearest-neighbor graph of the
  embeddings, k from the eigengap of the normalized Laplacian; matching by
  nearest training exemplar.
* agglomerative clustering of tf-idf-weighted substitute representatives
  with a cluster-count cap c; matching by nearest training representative
  with a plurality vote across an occurrence's representatives.

Training is Euclidean, matching is cosine; the asymmetry is intentional.
All training is a pure function of (entries, params, seed).
"""

from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.linalg import eigh
from sklearn.cluster import KMeans

from .ingest import Comment, CorpusSlice
from .lexical import FrequencyTable, top_fraction_types

DEFAULT_GAMMA = 10000.0
DEFAULT_KNN = 7
DEFAULT_MAX_CLUSTERS = 25
DEFAULT_K_MAX = 10
DEFAULT_N_INIT = 10
N_REPRESENTATIVES = 15
N_SUBSTITUTES = 20

_EMOJI_RANGES = (
    (0x1F000, 0x1FAFF),
    (0x2600, 0x27BF),
    (0x2190, 0x21FF),
    (0x2B00, 0x2BFF),
    (0xFE00, 0xFE0F),
    (0x1F1E6, 0x1F1FF),
)


@dataclass(frozen=True, order=True)
class Occurrence:
    """One occurrence of a token, keyed by (token, community, comment, position)."""

    token: str
    community: str
    comment_id: str
    position: int
    user: str = ""


def is_emoji_token(token: str) -> bool:
    return any(lo <= ord(ch) <= hi for ch in token for lo, hi in _EMOJI_RANGES)


def derive_seed(global_seed: int, *parts: object) -> int:
    """Stable per-job seed so parallel schedules cannot change results."""
    payload = "\x1f".join([str(global_seed), *map(str, parts)])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


def select_sense_vocab(
    table: FrequencyTable,
    occurrence_counts: Mapping[str, int],
    top_fraction: float = 0.10,
    min_total: int = 500,
    min_breadth: int = 350,
) -> set[str]:
    """Tokens worth inducing senses for: very common somewhere (top 10% of at
    least one community), frequent overall, broadly used, and not emoji."""
    candidates: set[str] = set()
    for community in table.communities():
        candidates |= {str(t) for t in top_fraction_types(table, community, top_fraction)}
    return {
        t for t in candidates
        if not is_emoji_token(t)
        and occurrence_counts.get(t, 0) >= min_total
        and table.doc_freq.get(t, 0) >= min_breadth
    }


def occurrences_of(token: str, slices: Iterable[CorpusSlice]) -> list[tuple[Comment, int]]:
    out = []
    for sl in slices:
        for comment in sl.comments:
            for pos, tok in enumerate(comment.tokens):
                if tok == token:
                    out.append((comment, pos))
    return out


def to_occurrence(token: str, comment: Comment, position: int) -> Occurrence:
    return Occurrence(token=token, community=comment.community,
                      comment_id=comment.comment_id, position=position,
                      user=comment.author)


def sample_training_occurrences(
    occurrences: Sequence[Occurrence],
    n: int = 500,
    seed: int = 0,
) -> list[Occurrence]:
    """Uniform seeded sample of min(n, available) occurrences, order-free."""
    if not occurrences:
        raise ValueError("no occurrences to sample from")
    ordered = sorted(occurrences)
    if len(ordered) <= n:
        return ordered
    rng = random.Random(seed)
    return sorted(rng.sample(ordered, n))


# --- cluster-count selection ---

def _fit_kmeans_series(X: np.ndarray, k_max: int, seed: int, n_init: int) -> dict[int, KMeans]:
    distinct = np.unique(X, axis=0).shape[0]
    fits = {}
    for k in range(1, min(k_max, distinct) + 1):
        fits[k] = KMeans(n_clusters=k, init="k-means++", n_init=n_init,
                         random_state=seed).fit(X)
    return fits


def rss_curve(vectors: Sequence[Sequence[float]], k_max: int = DEFAULT_K_MAX,
              seed: int = 0, n_init: int = DEFAULT_N_INIT) -> list[tuple[int, float]]:
    X = np.asarray(vectors, dtype=float)
    fits = _fit_kmeans_series(X, k_max, seed, n_init)
    return [(k, float(fits[k].inertia_)) for k in sorted(fits)]


def choose_k_penalized(vectors: Sequence[Sequence[float]], gamma: float,
                       k_max: int = DEFAULT_K_MAX, seed: int = 0,
                       n_init: int = DEFAULT_N_INIT) -> int:
    """argmin_k RSS(k) + gamma * k over k = 1..k_max; ties take the smaller k."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    curve = rss_curve(vectors, k_max, seed, n_init)
    return min(curve, key=lambda kr: (kr[1] + gamma * kr[0], kr[0]))[0]


def choose_k_eigengap(eigenvalues: Sequence[float], k_range: int = 10) -> int:
    """argmax_k of the gap between consecutive smallest Laplacian eigenvalues."""
    lam = sorted(eigenvalues)
    k_max = min(k_range, len(lam) - 1)
    if k_max < 1:
        return 1
    best_k, best_gap = 1, -float("inf")
    for k in range(1, k_max + 1):
        gap = lam[k] - lam[k - 1]
        if gap > best_gap:
            best_k, best_gap = k, gap
    return best_k


# --- sense models ---

@dataclass
class SenseModel:
    token: str
    method: str
    seed: int
    params: dict = field(default_factory=dict)
    # kmeans payload
    centroids: np.ndarray | None = None
    # spectral payload: labeled training exemplars
    exemplars: np.ndarray | None = None
    exemplar_labels: np.ndarray | None = None
    # substitution payload: tf-idf representative vectors with labels
    vocab: list[str] | None = None
    idf: np.ndarray | None = None
    rep_vectors: np.ndarray | None = None
    rep_labels: np.ndarray | None = None
    cluster_sizes: dict[int, int] = field(default_factory=dict)
    train_assignments: dict[Occurrence, int] = field(default_factory=dict)

    @property
    def n_senses(self) -> int:
        if self.method == "kmeans":
            return len(self.centroids)
        if self.method == "spectral":
            return len(set(self.exemplar_labels.tolist()))
        return len(self.cluster_sizes)

    def sense_ids(self) -> list[int]:
        if self.method == "kmeans":
            return list(range(len(self.centroids)))
        if self.method == "spectral":
            return sorted(set(self.exemplar_labels.tolist()))
        return sorted(self.cluster_sizes)


def _relabel_by_size(labels: np.ndarray) -> tuple[np.ndarray, dict[int, int]]:
    """Map raw cluster labels to 0..k-1 by descending size (ties by old label)."""
    sizes = Counter(labels.tolist())
    order = sorted(sizes, key=lambda c: (-sizes[c], c))
    mapping = {old: new for new, old in enumerate(order)}
    return np.array([mapping[c] for c in labels.tolist()], dtype=np.int64), mapping


def _sorted_entries(entries: Mapping[Occurrence, object]) -> list[Occurrence]:
    if not entries:
        raise ValueError("no training entries")
    return sorted(entries)


def train_kmeans_senses(
    entries: Mapping[Occurrence, np.ndarray],
    gamma: float = DEFAULT_GAMMA,
    k_max: int = DEFAULT_K_MAX,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
) -> SenseModel:
    """Penalized k-means over embeddings; senses are centroids."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    occs = _sorted_entries(entries)
    X = np.stack([np.asarray(entries[o], dtype=float) for o in occs])
    fits = _fit_kmeans_series(X, k_max, seed, n_init)
    k = min(((kk, f.inertia_) for kk, f in fits.items()),
            key=lambda kr: (kr[1] + gamma * kr[0], kr[0]))[0]
    best = fits[k]
    labels, mapping = _relabel_by_size(np.asarray(best.labels_, dtype=np.int64))
    centroids = np.empty_like(best.cluster_centers_)
    for old, new in mapping.items():
        centroids[new] = best.cluster_centers_[old]
    model = SenseModel(
        token=occs[0].token, method="kmeans", seed=seed,
        params={"gamma": gamma, "k_max": k_max, "n_init": n_init},
        centroids=centroids,
        cluster_sizes=dict(Counter(labels.tolist())),
        train_assignments={o: int(l) for o, l in zip(occs, labels)},
    )
    return model


def _cosine_to_rows(matrix: np.ndarray, vector: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1)
    vnorm = np.linalg.norm(vector)
    sims = matrix @ vector
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(norms > 0, sims / (norms * vnorm), -np.inf)
    return sims


def match_embedding(model: SenseModel, vector: Sequence[float]) -> int:
    """Sense whose centroid has the highest cosine similarity."""
    v = np.asarray(vector, dtype=float)
    if np.linalg.norm(v) == 0:
        raise ValueError("cannot match a zero vector by cosine similarity")
    sims = _cosine_to_rows(model.centroids, v)
    return int(np.argmax(sims))


def _knn_adjacency(X: np.ndarray, k: int) -> np.ndarray:
    """Symmetric KNN graph: unit edge whenever either endpoint nominates the other."""
    sq = np.sum(X * X, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X @ X.T)
    np.fill_diagonal(d2, np.inf)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    n = X.shape[0]
    A = np.zeros((n, n))
    rows = np.repeat(np.arange(n), k)
    A[rows, idx.ravel()] = 1.0
    return np.maximum(A, A.T)


def _normalized_laplacian(A: np.ndarray) -> np.ndarray:
    deg = A.sum(axis=1)
    with np.errstate(divide="ignore"):
        dinv = np.where(deg > 0, 1.0 / np.sqrt(deg), 0.0)
    L = np.eye(A.shape[0]) - dinv[:, None] * A * dinv[None, :]
    return (L + L.T) / 2.0


def train_spectral_senses(
    entries: Mapping[Occurrence, np.ndarray],
    knn: int = DEFAULT_KNN,
    seed: int = 0,
    n_init: int = DEFAULT_N_INIT,
    k_range: int = 10,
) -> SenseModel:
    """Spectral clustering with eigengap k-selection; exemplars kept for matching."""
    occs = _sorted_entries(entries)
    X = np.stack([np.asarray(entries[o], dtype=float) for o in occs])
    n = X.shape[0]
    if n < knn + 1:
        raise ValueError(f"need at least {knn + 1} points for a {knn}-NN graph")
    L = _normalized_laplacian(_knn_adjacency(X, knn))
    top = min(k_range, n - 1)
    lam = eigh(L, eigvals_only=True, subset_by_index=[0, top])
    k = choose_k_eigengap(lam, k_range)
    _, vecs = eigh(L, subset_by_index=[0, k - 1])
    embedding = vecs if vecs.ndim == 2 else vecs.reshape(-1, 1)
    km = KMeans(n_clusters=k, init="k-means++", n_init=n_init, random_state=seed)
    raw = km.fit_predict(embedding)
    labels, _ = _relabel_by_size(np.asarray(raw, dtype=np.int64))
    return SenseModel(
        token=occs[0].token, method="spectral", seed=seed,
        params={"knn": knn, "n_init": n_init, "k_range": k_range},
        exemplars=X, exemplar_labels=labels,
        cluster_sizes=dict(Counter(labels.tolist())),
        train_assignments={o: int(l) for o, l in zip(occs, labels)},
    )


def match_spectral(model: SenseModel, vector: Sequence[float]) -> int:
    """Label of the nearest training exemplar by cosine similarity."""
    v = np.asarray(vector, dtype=float)
    if np.linalg.norm(v) == 0:
        raise ValueError("cannot match a zero vector by cosine similarity")
    sims = _cosine_to_rows(model.exemplars, v)
    best = sims.max()
    return int(model.exemplar_labels[sims == best].min())


# --- substitution back-end ---

def _rep_counts(representative: Iterable[str]) -> Counter:
    counts = Counter(representative)
    if sum(counts.values()) != N_SUBSTITUTES:
        raise ValueError(f"each representative must hold {N_SUBSTITUTES} substitutes")
    return counts


def _tfidf_matrix(reps: list[Counter], vocab: list[str]) -> tuple[np.ndarray, np.ndarray]:
    """Smoothed tf-idf with L2-normalized rows; returns (matrix, idf)."""
    index = {t: j for j, t in enumerate(vocab)}
    M = np.zeros((len(reps), len(vocab)))
    for i, counts in enumerate(reps):
        for tok, c in counts.items():
            M[i, index[tok]] = c
    df = (M > 0).sum(axis=0)
    n = len(reps)
    idf = np.log((1.0 + n) / (1.0 + df)) + 1.0
    X = M * idf
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    X = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    return X, idf


def _apply_tfidf(reps: list[Counter], vocab: list[str], idf: np.ndarray) -> np.ndarray:
    index = {t: j for j, t in enumerate(vocab)}
    M = np.zeros((len(reps), len(vocab)))
    for i, counts in enumerate(reps):
        for tok, c in counts.items():
            j = index.get(tok)
            if j is not None:
                M[i, j] = c
    X = M * idf
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    return np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)


def _flatten_capped(X: np.ndarray, cap: int) -> np.ndarray:
    """Average-linkage/cosine dendrogram cut at the most clusters <= cap."""
    if X.shape[0] == 1:
        return np.zeros(1, dtype=np.int64)
    Z = linkage(X, method="average", metric="cosine")
    return np.asarray(fcluster(Z, t=cap, criterion="maxclust"), dtype=np.int64)


def _merge_small_clusters(X: np.ndarray, labels: np.ndarray, min_share: float) -> np.ndarray:
    """Fold clusters holding < min_share of rows into the nearest big cluster
    by centroid cosine similarity."""
    sizes = Counter(labels.tolist())
    n = len(labels)
    big = sorted(c for c, s in sizes.items() if s >= min_share * n)
    if not big:
        biggest = max(sizes, key=lambda c: (sizes[c], -c))
        big = [biggest]
    centroids = {c: X[labels == c].mean(axis=0) for c in sizes}

    def centroid_sim(a: int, b: int) -> float:
        denom = np.linalg.norm(centroids[a]) * np.linalg.norm(centroids[b])
        return float(centroids[a] @ centroids[b] / denom) if denom > 0 else -1.0

    out = labels.copy()
    for c in sorted(sizes):
        if c in big:
            continue
        target = max(big, key=lambda b: (round(centroid_sim(c, b), 12), sizes[b], -b))
        out[labels == c] = target
    return out


def _plurality(votes: Iterable[int], cluster_sizes: Mapping[int, int]) -> int:
    """Most voted sense; ties prefer the larger training cluster, then lower id."""
    tally = Counter(votes)
    return min(tally, key=lambda c: (-tally[c], -cluster_sizes.get(c, 0), c))


def train_substitution_senses(
    entries: Mapping[Occurrence, Sequence[Iterable[str]]],
    cap: int = DEFAULT_MAX_CLUSTERS,
    seed: int = 0,
    min_share: float = 0.02,
) -> SenseModel:
    """Cluster substitute representatives; occurrences take plurality senses.

    Every occurrence must carry exactly 15 representatives of 20 substitutes.
    Representatives are tf-idf weighted, clustered by average-linkage cosine
    agglomeration capped at ``cap`` flat clusters, and clusters below
    ``min_share`` of representatives are merged into their nearest neighbor.
    """
    occs = _sorted_entries(entries)
    reps: list[Counter] = []
    owner: list[int] = []
    for i, occ in enumerate(occs):
        rlist = list(entries[occ])
        if len(rlist) != N_REPRESENTATIVES:
            raise ValueError(f"{occ.token!r} occurrence needs {N_REPRESENTATIVES} representatives")
        for rep in rlist:
            reps.append(_rep_counts(rep))
            owner.append(i)
    vocab = sorted({tok for counts in reps for tok in counts})
    X, idf = _tfidf_matrix(reps, vocab)
    raw = _flatten_capped(X, cap)
    merged = _merge_small_clusters(X, raw, min_share)
    labels, _ = _relabel_by_size(merged)
    sizes = dict(Counter(labels.tolist()))
    assignments: dict[Occurrence, int] = {}
    for i, occ in enumerate(occs):
        votes = [int(labels[j]) for j in range(len(owner)) if owner[j] == i]
        assignments[occ] = _plurality(votes, sizes)
    return SenseModel(
        token=occs[0].token, method="substitution", seed=seed,
        params={"cap": cap, "min_share": min_share},
        vocab=vocab, idf=idf, rep_vectors=X, rep_labels=labels,
        cluster_sizes=sizes, train_assignments=assignments,
    )


def match_substitution(model: SenseModel, representatives: Sequence[Iterable[str]]) -> int:
    """Plurality over each representative's nearest training representative."""
    if len(representatives) != N_REPRESENTATIVES:
        raise ValueError(f"need {N_REPRESENTATIVES} representatives to match")
    counts = [_rep_counts(r) for r in representatives]
    Q = _apply_tfidf(counts, model.vocab, model.idf)
    votes = []
    largest = min(model.cluster_sizes,
                  key=lambda c: (-model.cluster_sizes[c], c))
    for row in Q:
        if not row.any():
            votes.append(largest)  # all substitutes out of vocabulary
            continue
        sims = model.rep_vectors @ row
        best = sims.max()
        votes.append(int(model.rep_labels[sims == best].min()))
    return _plurality(votes, model.cluster_sizes)


def match_occurrences(
    model: SenseModel,
    entries: Mapping[Occurrence, object],
) -> dict[Occurrence, int]:
    """Assign a sense to every occurrence of a modeled token."""
    matcher = {
        "kmeans": match_embedding,
        "spectral": match_spectral,
        "substitution": match_substitution,
    }[model.method]
    return {occ: matcher(model, rep) for occ, rep in sorted(entries.items())}


# --- model serialization (npz with occurrence keys flattened to arrays) ---

def _pack_occurrences(occs: Sequence[Occurrence], labels: Sequence[int]) -> dict[str, np.ndarray]:
    return {
        "occ_token": np.array([o.token for o in occs], dtype=np.str_),
        "occ_community": np.array([o.community for o in occs], dtype=np.str_),
        "occ_comment": np.array([o.comment_id for o in occs], dtype=np.str_),
        "occ_position": np.array([o.position for o in occs], dtype=np.int64),
        "occ_user": np.array([o.user for o in occs], dtype=np.str_),
        "occ_label": np.array(list(labels), dtype=np.int64),
    }


def _unpack_occurrences(data) -> dict[Occurrence, int]:
    out = {}
    for tok, comm, cid, pos, user, lab in zip(
        data["occ_token"], data["occ_community"], data["occ_comment"],
        data["occ_position"], data["occ_user"], data["occ_label"],
    ):
        out[Occurrence(str(tok), str(comm), str(cid), int(pos), str(user))] = int(lab)
    return out


def save_model(model: SenseModel, path: str | Path) -> None:
    occs = sorted(model.train_assignments)
    arrays: dict[str, np.ndarray] = {
        "token": np.array(model.token, dtype=np.str_),
        "method": np.array(model.method, dtype=np.str_),
        "seed": np.array(model.seed, dtype=np.int64),
        "params": np.array(json.dumps(model.params, sort_keys=True), dtype=np.str_),
        "size_keys": np.array(sorted(model.cluster_sizes), dtype=np.int64),
        "size_vals": np.array([model.cluster_sizes[k] for k in sorted(model.cluster_sizes)],
                              dtype=np.int64),
    }
    arrays.update(_pack_occurrences(occs, [model.train_assignments[o] for o in occs]))
    if model.method == "kmeans":
        arrays["centroids"] = model.centroids
    elif model.method == "spectral":
        arrays["exemplars"] = model.exemplars
        arrays["exemplar_labels"] = model.exemplar_labels
    elif model.method == "substitution":
        arrays["vocab"] = np.array(model.vocab, dtype=np.str_)
        arrays["idf"] = model.idf
        arrays["rep_vectors"] = model.rep_vectors
        arrays["rep_labels"] = model.rep_labels
    else:
        raise ValueError(f"unknown method {model.method!r}")
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_model(path: str | Path) -> SenseModel:
    data = np.load(path, allow_pickle=False)
    method = str(data["method"])
    model = SenseModel(
        token=str(data["token"]),
        method=method,
        seed=int(data["seed"]),
        params=json.loads(str(data["params"])),
        cluster_sizes={int(k): int(v) for k, v in zip(data["size_keys"], data["size_vals"])},
        train_assignments=_unpack_occurrences(data),
    )
    if method == "kmeans":
        model.centroids = data["centroids"]
    elif method == "spectral":
        model.exemplars = data["exemplars"]
        model.exemplar_labels = data["exemplar_labels"]
    elif method == "substitution":
        model.vocab = [str(t) for t in data["vocab"]]
        model.idf = data["idf"]
        model.rep_vectors = data["rep_vectors"]
        model.rep_labels = data["rep_labels"]
    return model
