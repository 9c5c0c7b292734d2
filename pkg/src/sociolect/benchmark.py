"""WSI evaluation harness: train/match protocol and clustering-agreement measures.

The protocol trains each back-end on at most 500 sampled training instances
per lemma and matches every test instance to an induced sense. Agreement with
gold senses is reported as paired F-score, V-measure, NMI and B-Cubed,
averaged over lemmas, together with the geometric means the benchmark tables
pair them into.
"""

from __future__ import annotations

import math
import random
import xml.etree.ElementTree as ET
from collections import Counter, defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .wsi import (
    Occurrence,
    derive_seed,
    match_embedding,
    match_spectral,
    match_substitution,
    train_kmeans_senses,
    train_spectral_senses,
    train_substitution_senses,
)

MFS_METHOD = "mfs"
METHODS = ("kmeans", "spectral", "substitution", MFS_METHOD)


@dataclass(frozen=True)
class LabeledInstance:
    instance_id: str
    lemma: str
    tokens: tuple[str, ...]
    position: int
    gold_sense: str = ""


# --- dataset loading (sense-tagged XML plus whitespace key files) ---

def load_instances_xml(path: str | Path) -> list[LabeledInstance]:
    """Parse instances from sense-task XML.

    Every ``<instance id=...>`` element contributes one instance; the target
    word is the element's single ``<head>`` child (searched through an
    optional ``<context>`` wrapper). The lemma comes from the instance's
    ``lemma`` attribute when present, else from the ``item``/``lexelt``
    ancestor attribute, else the head token itself.
    """
    tree = ET.parse(path)
    root = tree.getroot()
    out: list[LabeledInstance] = []
    lemma_of: dict[ET.Element, str] = {}
    parents = {child: parent for parent in root.iter() for child in parent}
    for inst in root.iter("instance"):
        context = inst.find("context")
        node = context if context is not None else inst
        before = (node.text or "").split()
        head = node.find("head")
        if head is None:
            continue
        target = (head.text or "").strip()
        after = (head.tail or "").split()
        tokens = tuple(t.lower() for t in (*before, target, *after))
        lemma = inst.get("lemma")
        if lemma is None:
            anc = parents.get(inst)
            while anc is not None and lemma is None:
                lemma = anc.get("item") or anc.get("lemma")
                anc = parents.get(anc)
        if lemma is None:
            lemma = target.lower()
        out.append(LabeledInstance(
            instance_id=inst.get("id", f"{lemma}.{len(out)}"),
            lemma=lemma,
            tokens=tokens,
            position=len(before),
        ))
    return out


def load_key(path: str | Path) -> dict[str, tuple[str, ...]]:
    """Key lines are ``lemma instance_id sense [sense ...]``; graded senses
    written as ``label/weight`` keep only the label."""
    out: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if len(parts) < 3:
                continue
            senses = tuple(p.split("/")[0] for p in parts[2:])
            out[parts[1]] = senses
    return out


def apply_single_sense_key(
    instances: Iterable[LabeledInstance],
    key: Mapping[str, tuple[str, ...]],
) -> tuple[list[LabeledInstance], int]:
    """Attach gold senses from a single-sense key; unkeyed instances are
    skipped and counted."""
    labeled = []
    skipped = 0
    for inst in instances:
        senses = key.get(inst.instance_id)
        if not senses:
            skipped += 1
            continue
        labeled.append(LabeledInstance(
            instance_id=inst.instance_id, lemma=inst.lemma,
            tokens=inst.tokens, position=inst.position, gold_sense=senses[0],
        ))
    return labeled, skipped


# --- protocol ---

def _as_occurrence(lemma: str, instance_id: str, split: str) -> Occurrence:
    return Occurrence(token=lemma, community=split, comment_id=instance_id,
                      position=0, user=instance_id)


def run_protocol(
    method: str,
    train: Mapping[str, Mapping[str, object]],
    test: Mapping[str, Mapping[str, object]],
    params: Mapping[str, object] | None = None,
    seed: int = 0,
    max_train: int = 500,
) -> dict[str, str]:
    """Train per lemma on sampled instances and label every test instance.

    ``train``/``test`` map lemma -> instance_id -> representation (a vector
    for the embedding back-ends, a representative list for substitution).
    Returns instance_id -> "lemma.cluster" labels.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    params = dict(params or {})
    pred: dict[str, str] = {}
    for lemma in sorted(train):
        reps = train[lemma]
        queries = test.get(lemma, {})
        if method == MFS_METHOD:
            for iid in queries:
                pred[iid] = f"{lemma}.0"
            continue
        ids = sorted(reps)
        lemma_seed = derive_seed(seed, lemma)
        if len(ids) > max_train:
            rng = random.Random(lemma_seed)
            ids = sorted(rng.sample(ids, max_train))
        entries = {_as_occurrence(lemma, iid, "train"): reps[iid] for iid in ids}
        if method == "kmeans":
            model = train_kmeans_senses(
                entries,
                gamma=float(params.get("gamma", 10000.0)),
                k_max=int(params.get("k_max", 10)),
                seed=lemma_seed,
            )
            matcher = match_embedding
        elif method == "spectral":
            model = train_spectral_senses(
                entries,
                knn=int(params.get("knn", 7)),
                seed=lemma_seed,
            )
            matcher = match_spectral
        else:
            model = train_substitution_senses(
                entries,
                cap=int(params.get("cap", 25)),
                seed=lemma_seed,
            )
            matcher = match_substitution
        for iid in sorted(queries):
            pred[iid] = f"{lemma}.{matcher(model, queries[iid])}"
    return pred


# --- clustering agreement measures ---

def _check_aligned(pred: Sequence[object], gold: Sequence[object]) -> None:
    if len(pred) != len(gold) or not pred:
        raise ValueError("pred and gold must be non-empty and aligned")


def _contingency(pred: Sequence[object], gold: Sequence[object]):
    cells: dict[tuple[object, object], int] = defaultdict(int)
    for p, g in zip(pred, gold):
        cells[(p, g)] += 1
    return cells, Counter(pred), Counter(gold)


def _pairs(n: int) -> int:
    return n * (n - 1) // 2


def paired_fscore(pred: Sequence[object], gold: Sequence[object]) -> float:
    """F1 over instance pairs placed together by prediction vs gold."""
    _check_aligned(pred, gold)
    cells, pc, gc = _contingency(pred, gold)
    both = sum(_pairs(c) for c in cells.values())
    pred_pairs = sum(_pairs(c) for c in pc.values())
    gold_pairs = sum(_pairs(c) for c in gc.values())
    if pred_pairs == 0 and gold_pairs == 0:
        return 1.0
    if pred_pairs == 0 or gold_pairs == 0:
        return 0.0
    precision = both / pred_pairs
    recall = both / gold_pairs
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _entropy(counts: Iterable[int], n: int) -> float:
    return -sum((c / n) * math.log(c / n) for c in counts if c > 0)


def v_measure(pred: Sequence[object], gold: Sequence[object]) -> float:
    """Harmonic mean of homogeneity and completeness (natural-log entropies)."""
    _check_aligned(pred, gold)
    cells, pc, gc = _contingency(pred, gold)
    n = len(pred)
    h_gold = _entropy(gc.values(), n)
    h_pred = _entropy(pc.values(), n)
    h_gold_given_pred = -sum(
        (c / n) * math.log(c / pc[p]) for (p, _), c in cells.items() if c > 0
    )
    h_pred_given_gold = -sum(
        (c / n) * math.log(c / gc[g]) for (p, g), c in cells.items() if c > 0
    )
    homogeneity = 1.0 if h_gold == 0 else 1.0 - h_gold_given_pred / h_gold
    completeness = 1.0 if h_pred == 0 else 1.0 - h_pred_given_gold / h_pred
    if homogeneity + completeness == 0:
        return 0.0
    return 2 * homogeneity * completeness / (homogeneity + completeness)


def nmi(pred: Sequence[object], gold: Sequence[object]) -> float:
    """Mutual information normalized by max(H(pred), H(gold))."""
    _check_aligned(pred, gold)
    cells, pc, gc = _contingency(pred, gold)
    n = len(pred)
    h_pred = _entropy(pc.values(), n)
    h_gold = _entropy(gc.values(), n)
    denom = max(h_pred, h_gold)
    if denom == 0:
        return 1.0  # both clusterings are the trivial single cluster
    mi = sum(
        (c / n) * math.log(c * n / (pc[p] * gc[g]))
        for (p, g), c in cells.items() if c > 0
    )
    return min(max(mi / denom, 0.0), 1.0)


def bcubed(pred: Sequence[object], gold: Sequence[object]) -> float:
    """Harmonic mean of item-averaged B-Cubed precision and recall."""
    _check_aligned(pred, gold)
    cells, pc, gc = _contingency(pred, gold)
    n = len(pred)
    precision = recall = 0.0
    for (p, g), c in cells.items():
        precision += c * (c / pc[p])
        recall += c * (c / gc[g])
    precision /= n
    recall /= n
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


MEASURES = {
    "fscore": paired_fscore,
    "vmeasure": v_measure,
    "nmi": nmi,
    "bcubed": bcubed,
}


def evaluate(
    pred: Mapping[str, str],
    gold: Mapping[str, str],
    lemma_of: Mapping[str, str],
) -> dict[str, float]:
    """Unweighted per-lemma means of the four measures plus geometric means."""
    shared = sorted(set(pred) & set(gold))
    if not shared:
        raise ValueError("no instances are both predicted and gold-labeled")
    by_lemma: dict[str, list[str]] = defaultdict(list)
    for iid in shared:
        by_lemma[lemma_of[iid]].append(iid)
    sums = {name: 0.0 for name in MEASURES}
    for lemma, ids in sorted(by_lemma.items()):
        p = [pred[i] for i in ids]
        g = [gold[i] for i in ids]
        for name, fn in MEASURES.items():
            sums[name] += fn(p, g)
    k = len(by_lemma)
    out = {name: total / k for name, total in sums.items()}
    out["fv_geometric"] = math.sqrt(out["fscore"] * out["vmeasure"])
    out["nmi_bcubed_geometric"] = math.sqrt(out["nmi"] * out["bcubed"])
    return out
