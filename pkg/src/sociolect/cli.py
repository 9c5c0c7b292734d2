"""Batch pipeline CLI.

Stages write their artifacts under the output directory, each in its own
subdirectory with a ``_meta.json`` carrying the config hash; downstream
stages refuse inputs produced under a different configuration. Every stage
is individually rerunnable and byte-deterministic for a fixed config + seed.
"""

from __future__ import annotations

import argparse
import glob as globlib
import json
import sys
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import community as communitymod
from . import glossary as glossarymod
from . import semantic, stats
from .benchmark import (
    apply_single_sense_key,
    evaluate,
    load_instances_xml,
    load_key,
    run_protocol,
)
from .config import PipelineConfig
from .ingest import (
    Comment,
    CorpusSlice,
    ParseCounters,
    filter_bot_contexts,
    group_by_community,
    parse_comment_stream,
    read_corpus,
    sample_community,
    write_corpus,
)
from .lexical import (
    FrequencyTable,
    count_occurrences,
    score_community_vocab,
    score_textrank,
    select_type_vocab,
)
from .shards import load_shards
from .util import fmt_float, iter_lines, read_json, read_tsv, write_json, write_tsv
from .wsi import (
    Occurrence,
    derive_seed,
    load_model,
    match_occurrences,
    sample_training_occurrences,
    save_model,
    select_sense_vocab,
    train_kmeans_senses,
    train_spectral_senses,
    train_substitution_senses,
)

TYPE_METRICS = ("pmi", "npmi", "tfidf", "textrank", "jsd")


class StageError(SystemExit):
    def __init__(self, message: str):
        super().__init__(f"sociolect: error: {message}")


def _stage_dir(cfg: PipelineConfig, stage: str, create: bool = False) -> Path:
    path = Path(cfg.out) / stage.replace("-", "_")
    if create:
        path.mkdir(parents=True, exist_ok=True)
    return path


def _write_meta(cfg: PipelineConfig, stage: str, extra: dict | None = None) -> None:
    payload = {"stage": stage, "config_hash": cfg.config_hash(), "seed": cfg.seed}
    if extra:
        payload.update(extra)
    write_json(_stage_dir(cfg, stage) / "_meta.json", payload)


def _require_stage(cfg: PipelineConfig, stage: str, needed_by: str) -> dict:
    meta_path = _stage_dir(cfg, stage) / "_meta.json"
    if not meta_path.exists():
        raise StageError(
            f"'{needed_by}' needs artifacts from stage '{stage}' "
            f"({meta_path.parent}); run `sociolect {stage}` first"
        )
    meta = read_json(meta_path)
    if meta.get("config_hash") != cfg.config_hash():
        raise StageError(
            f"stage '{stage}' artifacts were produced under config hash "
            f"{meta.get('config_hash')}, current is {cfg.config_hash()}; refusing mixed inputs"
        )
    return meta


def _stage_meta_if_present(cfg: PipelineConfig, stage: str, needed_by: str) -> dict | None:
    if (_stage_dir(cfg, stage) / "_meta.json").exists():
        return _require_stage(cfg, stage, needed_by)
    return None


def _tsv(cfg: PipelineConfig, path, header, rows) -> None:
    write_tsv(path, header, rows, comment=f"config {cfg.config_hash()}")


def _pmap(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(item) for item in items]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _load_sampled_slices(cfg: PipelineConfig) -> list[CorpusSlice]:
    path = _stage_dir(cfg, "ingest") / "corpus_sampled.jsonl"
    with open(path, encoding="utf-8") as fh:
        comments = list(read_corpus(fh))
    grouped = group_by_community(comments)
    return [
        CorpusSlice(community=s, comments=grouped[s],
                    sample_seed=cfg.seed, sample_size=cfg.sample_size)
        for s in sorted(grouped)
    ]


def _load_full_comments(cfg: PipelineConfig) -> list[Comment]:
    path = _stage_dir(cfg, "ingest") / "corpus_full.jsonl"
    with open(path, encoding="utf-8") as fh:
        return list(read_corpus(fh))


def _read_metric_file(path: Path) -> dict[str, dict[str, float]]:
    """metric TSV -> {community: {token: value}}"""
    _, rows = read_tsv(path)
    out: dict[str, dict[str, float]] = defaultdict(dict)
    for community, token, _metric, value in rows:
        out[community][token] = float(value)
    return dict(out)


# --- ingest ---

def cmd_ingest(cfg: PipelineConfig, args) -> int:
    raw = args.input or cfg.corpus
    if not raw:
        raise StageError("ingest needs an input dump (--input or config key 'corpus')")
    outdir = _stage_dir(cfg, "ingest", create=True)
    counters = ParseCounters()
    comments = list(parse_comment_stream(iter_lines(raw), counters, strict=args.strict))
    comments.sort(key=lambda c: (c.community, c.comment_id))
    grouped = group_by_community(comments)
    sampled: list[Comment] = []
    per_community = {}
    for name in sorted(grouped):
        sl = sample_community(grouped[name], cfg.sample_size,
                              derive_seed(cfg.seed, "sample", name), community=name)
        sampled.extend(sl.comments)
        per_community[name] = {"total": len(grouped[name]), "sampled": len(sl.comments)}
    with open(outdir / "corpus_full.jsonl", "w", encoding="utf-8") as fh:
        write_corpus(comments, fh)
    with open(outdir / "corpus_sampled.jsonl", "w", encoding="utf-8") as fh:
        write_corpus(sampled, fh)
    _write_meta(cfg, "ingest", {
        "counters": {"parsed": counters.parsed, "skipped_deleted": counters.skipped_deleted,
                     "errors": counters.errors},
        "communities": per_community,
    })
    print(f"ingest: {counters.parsed} comments in {len(grouped)} communities "
          f"({counters.skipped_deleted} deleted, {counters.errors} malformed)")
    return 0


# --- type metrics ---

def _textrank_task(payload):
    sl, tags = payload
    return sl.community, score_textrank(sl, tags)


def cmd_type_metrics(cfg: PipelineConfig, args) -> int:
    _require_stage(cfg, "ingest", "type-metrics")
    outdir = _stage_dir(cfg, "type-metrics", create=True)
    slices = _load_sampled_slices(cfg)
    table = FrequencyTable.from_slices(slices)

    pos_tags = None
    pos_path = args.pos or cfg.pos_sidecar
    if pos_path:
        pos_tags = {}
        for line in iter_lines(pos_path):
            if line.strip():
                rec = json.loads(line)
                pos_tags[rec["id"]] = rec["tags"]

    textrank_by_community = dict(_pmap(
        _textrank_task, [(sl, pos_tags) for sl in slices], cfg.jobs))

    rows_by_metric: dict[str, list] = {m: [] for m in TYPE_METRICS}
    vocab_rows = []
    for sl in slices:
        s = sl.community
        vocab = select_type_vocab(table, s, cfg.type_top_fraction, cfg.type_min_count)
        scores = score_community_vocab(table, s, vocab, textrank_by_community[s])
        for sc in scores:
            vocab_rows.append((s, sc.token, table.f(s, sc.token)))
            rows_by_metric["pmi"].append((s, sc.token, "pmi", sc.pmi))
            rows_by_metric["npmi"].append((s, sc.token, "npmi", sc.npmi))
            rows_by_metric["tfidf"].append((s, sc.token, "tfidf", sc.tfidf))
            rows_by_metric["jsd"].append((s, sc.token, "jsd", sc.jsd))
            if sc.textrank is not None:
                rows_by_metric["textrank"].append((s, sc.token, "textrank", sc.textrank))
    header = ("community", "token", "metric", "value")
    for metric, rows in rows_by_metric.items():
        _tsv(cfg, outdir / f"{metric}.tsv", header, sorted(rows))
    _tsv(cfg, outdir / "vocab.tsv", ("community", "token", "users"), sorted(vocab_rows))
    _write_meta(cfg, "type-metrics", {"n_scored": len(rows_by_metric["npmi"])})
    print(f"type-metrics: scored {len(rows_by_metric['npmi'])} (community, token) pairs")
    return 0


# --- WSI ---

def _expand_shards(cfg: PipelineConfig, args) -> list[str]:
    pattern = getattr(args, "shards", None) or cfg.shards
    if not pattern:
        raise StageError("no shard files given (--shards or config key 'shards')")
    paths = sorted(p for pat in pattern.split(",") for p in globlib.glob(pat.strip()))
    if not paths:
        raise StageError(f"shard pattern {pattern!r} matched no files")
    return paths


def _check_kind(method: str, kind: str) -> None:
    need = "representative" if method == "substitution" else "embedding"
    if kind != need:
        raise StageError(f"method {method!r} needs {need} shards, got {kind} shards")


def _train_one(payload):
    token, entries, method, params, seed, path = payload
    if method == "kmeans":
        model = train_kmeans_senses(entries, gamma=params["gamma"],
                                    k_max=params["k_max"], seed=seed,
                                    n_init=params["n_init"])
    elif method == "spectral":
        model = train_spectral_senses(entries, knn=params["knn"], seed=seed,
                                      n_init=params["n_init"])
    else:
        model = train_substitution_senses(entries, cap=params["cap"], seed=seed)
    save_model(model, path)
    return token, Path(path).name, model.n_senses, len(model.train_assignments)


def cmd_wsi_train(cfg: PipelineConfig, args) -> int:
    _require_stage(cfg, "ingest", "wsi-train")
    outdir = _stage_dir(cfg, "wsi-train", create=True)
    models_dir = outdir / "models"
    models_dir.mkdir(exist_ok=True)
    method = args.method or cfg.wsi_method
    slices = _load_sampled_slices(cfg)
    table = FrequencyTable.from_slices(slices)
    occ_counts = count_occurrences(slices)
    vocab = select_sense_vocab(table, occ_counts, cfg.sense_top_fraction,
                               cfg.sense_min_total, cfg.sense_min_breadth)
    entries, kind = load_shards(_expand_shards(cfg, args))
    _check_kind(method, kind)

    comments_by_id = {c.comment_id: c for sl in slices for c in sl.comments}
    by_token: dict[str, dict[Occurrence, object]] = defaultdict(dict)
    for occ, rep in entries.items():
        if occ.token in vocab:
            by_token[occ.token][occ] = rep

    params = {"gamma": cfg.gamma, "k_max": cfg.k_max, "n_init": cfg.n_init,
              "knn": cfg.knn, "cap": cfg.max_clusters}
    tasks = []
    skipped: list[str] = []
    for i, token in enumerate(sorted(by_token)):
        token_entries = by_token[token]
        pairs = []
        occ_of_pair = {}
        for occ in sorted(token_entries):
            comment = comments_by_id.get(occ.comment_id)
            if comment is None:
                continue
            pairs.append((comment, occ.position))
            occ_of_pair[(occ.comment_id, occ.position)] = occ
        kept_pairs = filter_bot_contexts(pairs, cfg.bot_window, cfg.bot_repeats)
        kept = [occ_of_pair[(c.comment_id, p)] for c, p in kept_pairs]
        if not kept:
            skipped.append(token)
            continue
        train_occs = sample_training_occurrences(
            kept, cfg.train_examples, derive_seed(cfg.seed, "train", token))
        train_entries = {o: token_entries[o] for o in train_occs}
        tasks.append((token, train_entries, method, params,
                      derive_seed(cfg.seed, "wsi", token),
                      str(models_dir / f"model_{i:05d}.npz")))
    results = _pmap(_train_one, tasks, cfg.jobs)
    _tsv(cfg, outdir / "index.tsv", ("token", "file", "method", "n_senses", "n_train"),
         sorted((t, f, method, k, n) for t, f, k, n in results))
    _write_meta(cfg, "wsi-train", {
        "method": method, "n_models": len(results),
        "vocabulary": len(vocab), "skipped_all_bot": sorted(skipped),
    })
    print(f"wsi-train[{method}]: trained {len(results)} sense models "
          f"(vocabulary {len(vocab)}, {len(skipped)} skipped as bot-only)")
    return 0


def _match_one(payload):
    model_path, token_entries = payload
    model = load_model(model_path)
    assigned = match_occurrences(model, token_entries)
    return [
        (occ.token, occ.community, occ.comment_id, occ.position, occ.user, sense)
        for occ, sense in sorted(assigned.items())
    ]


def cmd_wsi_match(cfg: PipelineConfig, args) -> int:
    train_meta = _require_stage(cfg, "wsi-train", "wsi-match")
    outdir = _stage_dir(cfg, "wsi-match", create=True)
    entries, kind = load_shards(_expand_shards(cfg, args))
    _check_kind(train_meta["method"], kind)
    models_dir = _stage_dir(cfg, "wsi-train") / "models"
    _, index_rows = read_tsv(_stage_dir(cfg, "wsi-train") / "index.tsv")
    by_token: dict[str, dict[Occurrence, object]] = defaultdict(dict)
    modeled = {row[0] for row in index_rows}
    for occ, rep in entries.items():
        if occ.token in modeled:
            by_token[occ.token][occ] = rep
    tasks = [(str(models_dir / row[1]), by_token[row[0]])
             for row in sorted(index_rows) if by_token.get(row[0])]
    rows = [r for chunk in _pmap(_match_one, tasks, cfg.jobs) for r in chunk]
    rows.sort()
    _tsv(cfg, outdir / "assignments.tsv",
         ("token", "community", "comment_id", "position", "user", "sense_id"),
         rows)
    _write_meta(cfg, "wsi-match", {"method": train_meta["method"], "n_assigned": len(rows)})
    print(f"wsi-match: assigned senses to {len(rows)} occurrences")
    return 0


def _read_assignments(path: Path) -> dict[Occurrence, int]:
    _, rows = read_tsv(path)
    return {
        Occurrence(token, community, comment_id, int(position), user): int(sense)
        for token, community, comment_id, position, user, sense in rows
    }


def cmd_sense_metrics(cfg: PipelineConfig, args) -> int:
    match_meta = _require_stage(cfg, "wsi-match", "sense-metrics")
    outdir = _stage_dir(cfg, "sense-metrics", create=True)
    assignments = _read_assignments(_stage_dir(cfg, "wsi-match") / "assignments.tsv")
    if not assignments:
        raise StageError("assignments file is empty; nothing to score")
    method = match_meta["method"]
    sense_table = semantic.count_sense_users(assignments)
    scores = semantic.score_all(assignments, method)
    _tsv(cfg, outdir / "word_sense.tsv",
         ("community", "token", "method", "dominant_sense", "value"),
         [(s.community, s.token, s.method, s.dominant_sense, s.value)
          for s in scores])
    count_rows = []
    for community in sense_table.communities():
        for key, users in sorted(sense_table.counts[community].items(), key=str):
            token, sense_id = key
            count_rows.append((community, token, sense_id, users))
    _tsv(cfg, outdir / "sense_counts.tsv",
         ("community", "token", "sense_id", "users"), count_rows)
    _write_meta(cfg, "sense-metrics", {"method": method, "n_scored": len(scores)})
    print(f"sense-metrics[{method}]: scored {len(scores)} (community, token) pairs")
    return 0


# --- community attributes ---

def cmd_community(cfg: PipelineConfig, args) -> int:
    _require_stage(cfg, "ingest", "community")
    _require_stage(cfg, "type-metrics", "community")
    sense_meta = _stage_meta_if_present(cfg, "sense-metrics", "community")
    outdir = _stage_dir(cfg, "community", create=True)

    full = _load_full_comments(cfg)
    grouped = group_by_community(full)
    slices = _load_sampled_slices(cfg)
    table = FrequencyTable.from_slices(slices)

    npmi = _read_metric_file(_stage_dir(cfg, "type-metrics") / "npmi.tsv")
    type_values = [v for per in npmi.values() for v in per.values()]
    type_cutoff = stats.percentile_cutoff(type_values, cfg.percentile)

    sense_scores: dict[str, dict[str, float]] = {}
    sense_cutoff = float("inf")
    if sense_meta is not None:
        _, rows = read_tsv(_stage_dir(cfg, "sense-metrics") / "word_sense.tsv")
        for community, token, _method, _dom, value in rows:
            sense_scores.setdefault(community, {})[token] = float(value)
        sense_values = [v for per in sense_scores.values() for v in per.values()]
        sense_cutoff = stats.percentile_cutoff(sense_values, cfg.percentile)

    topics: dict[str, str] = {}
    topics_path = args.topics or cfg.topics
    if topics_path:
        _, rows = read_tsv(topics_path)
        topics = {r[0]: r[1] for r in rows}
    high = cfg.high_f_topic_list()

    loyalty = communitymod.compute_loyalty(full, cfg.loyalty_min_comments)

    profile_rows = []
    closeness_rows = []
    for name in sorted(grouped):
        comments = grouped[name]
        size, activity = communitymod.compute_user_stats(comments)
        graph = communitymod.build_reply_network(comments, cfg.top_user_fraction)
        density = communitymod.network_density(graph)
        vocab = [str(t) for t in select_type_vocab(
            table, name, cfg.type_top_fraction, cfg.type_min_count)]
        dist, type_frac, sense_frac = communitymod.distinctiveness_F(
            vocab, npmi.get(name, {}), sense_scores.get(name, {}),
            type_cutoff, sense_cutoff)
        flag = communitymod.topic_flag(topics.get(name), high)
        loy = loyalty.get(name)
        profile_rows.append((
            name, size, activity,
            "" if loy is None else fmt_float(loy),
            density, dist, type_frac, sense_frac,
            "" if flag is None else flag,
        ))
        if args.closeness:
            cent = communitymod.approx_closeness(
                graph, pivots=cfg.closeness_pivots, seed=derive_seed(cfg.seed, "close", name))
            closeness_rows.extend((name, u, c) for u, c in sorted(cent.items()))
    _tsv(cfg, outdir / "profiles.tsv",
         ("community", "size", "activity", "loyalty", "density",
          "distinctiveness", "type_fraction", "sense_fraction", "topic_flag"),
         profile_rows)
    if args.closeness:
        _tsv(cfg, outdir / "closeness.tsv", ("community", "user", "closeness"),
             closeness_rows)
    _write_meta(cfg, "community", {
        "type_cutoff": type_cutoff,
        "sense_cutoff": None if sense_meta is None else sense_cutoff,
        "n_communities": len(profile_rows),
    })
    print(f"community: profiled {len(profile_rows)} communities "
          f"(type cutoff {fmt_float(type_cutoff)})")
    return 0


# --- glossary evaluation ---

def cmd_glossary_eval(cfg: PipelineConfig, args) -> int:
    _require_stage(cfg, "type-metrics", "glossary-eval")
    sense_meta = _stage_meta_if_present(cfg, "sense-metrics", "glossary-eval")
    outdir = _stage_dir(cfg, "glossary-eval", create=True)
    gloss_path = args.glossaries or cfg.glossaries
    if not gloss_path:
        raise StageError("glossary-eval needs a glossary TSV "
                         "(--glossaries or config key 'glossaries')")
    slices = _load_sampled_slices(cfg)
    corpus_tokens = {sl.community: {t for c in sl.comments for t in c.tokens}
                     for sl in slices}
    with open(gloss_path, encoding="utf-8") as fh:
        glossaries = glossarymod.load_glossaries(fh, corpus_tokens)

    metric_files = {m: _stage_dir(cfg, "type-metrics") / f"{m}.tsv" for m in TYPE_METRICS}
    scored: dict[str, dict[str, dict[str, float]]] = {}
    for metric, path in metric_files.items():
        if path.exists():
            scored[metric] = _read_metric_file(path)
    if sense_meta is not None:
        _, rows = read_tsv(_stage_dir(cfg, "sense-metrics") / "word_sense.tsv")
        per: dict[str, dict[str, float]] = defaultdict(dict)
        for community, token, _method, _dom, value in rows:
            per[community][token] = float(value)
        scored[f"sense_{sense_meta['method']}"] = dict(per)

    report_rows = []
    for metric in scored:
        by_comm = scored[metric]
        values = [v for per in by_comm.values() for v in per.values()]
        if not values:
            continue
        cutoff = stats.percentile_cutoff(values, cfg.percentile)
        mrr = glossarymod.glossary_mrr(by_comm, glossaries)
        try:
            cov = glossarymod.glossary_coverage(by_comm, glossaries, cutoff)
        except ValueError:
            # no glossary word reaches this metric's vocabulary: report missing
            report_rows.append((metric, mrr, "", "", cutoff, "", 0))
            continue
        report_rows.append((
            metric, mrr, cov.median_glossary, cov.median_non_glossary,
            cutoff, cov.pct_above_cutoff, cov.n_glossary_scored,
        ))
    _tsv(cfg, outdir / "report.tsv",
         ("metric", "mrr", "median_glossary", "median_non_glossary",
          "cutoff", "pct_above_cutoff", "n_glossary_scored"),
         report_rows)
    if args.suggest:
        base = scored.get("npmi") or next(iter(scored.values()))
        values = [v for per in base.values() for v in per.values()]
        cutoff = stats.percentile_cutoff(values, cfg.percentile)
        suggestions = glossarymod.suggest_terms(base, glossaries, cutoff)
        _tsv(cfg, outdir / "suggestions.tsv", ("community", "token", "score"),
             [(c, t, v) for c, items in suggestions.items() for t, v in items])
    dropped = sum(g.dropped_multiword for g in glossaries.values())
    missing = sum(len(g.missing_from_corpus) for g in glossaries.values())
    _write_meta(cfg, "glossary-eval", {
        "n_glossaries": len(glossaries),
        "dropped_multiword": dropped,
        "terms_missing_from_corpus": missing,
    })
    print(f"glossary-eval: {len(glossaries)} glossaries, "
          f"{dropped} multi-word entries dropped, {missing} terms unseen in corpus")
    return 0


# --- SemEval-style benchmark ---

def cmd_semeval(cfg: PipelineConfig, args) -> int:
    outdir = _stage_dir(cfg, "semeval", create=True)
    method = args.method or cfg.wsi_method
    train_instances = load_instances_xml(args.train_xml)
    test_instances = load_instances_xml(args.test_xml)
    gold_key = load_key(args.gold_key)
    if args.single_key:
        single = load_key(args.single_key)
        labeled, skipped = apply_single_sense_key(test_instances, single)
    else:
        labeled, skipped = apply_single_sense_key(test_instances, gold_key)
    gold = {inst.instance_id: inst.gold_sense for inst in labeled}
    lemma_of = {inst.instance_id: inst.lemma for inst in labeled}

    if method == "mfs":
        # the most-frequent-sense baseline never consults representations
        reps = {inst.instance_id: 0 for inst in (*train_instances, *labeled)}
    else:
        entries, kind = load_shards(_expand_shards(cfg, args))
        _check_kind(method, kind)
        reps = {occ.comment_id: rep for occ, rep in entries.items()}

    def split_reps(instances):
        out: dict[str, dict[str, object]] = defaultdict(dict)
        missing = 0
        for inst in instances:
            rep = reps.get(inst.instance_id)
            if rep is None:
                missing += 1
                continue
            out[inst.lemma][inst.instance_id] = rep
        return dict(out), missing

    train_reps, train_missing = split_reps(train_instances)
    test_reps, test_missing = split_reps(labeled)
    params = {"gamma": cfg.gamma, "k_max": cfg.k_max, "knn": cfg.knn,
              "cap": cfg.max_clusters}
    per_seed = []
    for run in range(args.runs):
        pred = run_protocol(method, train_reps, test_reps, params,
                            seed=derive_seed(cfg.seed, "semeval", run),
                            max_train=cfg.train_examples)
        per_seed.append(evaluate(pred, gold, lemma_of))
    measures = sorted(per_seed[0])
    rows = []
    for name in measures:
        vals = [run[name] for run in per_seed]
        mean = sum(vals) / len(vals)
        var = sum((v - mean) ** 2 for v in vals) / len(vals)
        rows.append((method, name, mean, var ** 0.5, len(vals)))
    _tsv(cfg, outdir / "results.tsv", ("method", "measure", "mean", "std", "runs"), rows)
    _write_meta(cfg, "semeval", {
        "method": method, "runs": args.runs,
        "skipped_unkeyed": skipped,
        "missing_representations": train_missing + test_missing,
    })
    for _, name, mean, std, _n in rows:
        print(f"semeval[{method}] {name}: {mean:.4f} ({std:.4f})")
    return 0


# --- regression ---

def cmd_regress(cfg: PipelineConfig, args) -> int:
    _require_stage(cfg, "community", "regress")
    outdir = _stage_dir(cfg, "regress", create=True)
    header, rows = read_tsv(_stage_dir(cfg, "community") / "profiles.tsv")
    col = {name: i for i, name in enumerate(header)}
    feature_names = [f.strip() for f in args.features.split(",") if f.strip()]
    usable = []
    for row in rows:
        vals = {}
        ok = True
        for name in feature_names + ["distinctiveness", "topic_flag"]:
            raw = row[col[name]] if name in col else ""
            if raw == "" and name != "topic_flag":
                ok = False
                break
            vals[name] = float(raw) if raw != "" else None
        if ok:
            usable.append(vals)
    if len(usable) < len(feature_names) + 2:
        raise StageError(
            f"regress needs at least {len(feature_names) + 2} complete communities, "
            f"have {len(usable)}")
    y = [v["distinctiveness"] for v in usable]
    X_cols = [stats.zscore([v[name] for v in usable]) for name in feature_names]
    X = list(zip(*(c.tolist() for c in X_cols)))
    results = {"user_attributes": stats.ols(X, y, feature_names)}
    if all(v["topic_flag"] is not None for v in usable) and \
            len({v["topic_flag"] for v in usable}) > 1 and \
            len(usable) >= len(feature_names) + 3:
        X2 = [row + (v["topic_flag"],) for row, v in zip(X, usable)]
        results["with_topic"] = stats.ols(X2, y, feature_names + ["topic"])
    from .report import regression_rows, regression_text
    _tsv(cfg, outdir / "regression.tsv",
         ("model", "term", "estimate", "stderr", "p_value", "stars"),
         regression_rows(results))
    (outdir / "regression.txt").write_text(regression_text(results), encoding="utf-8")
    _write_meta(cfg, "regress", {"n": len(usable), "features": feature_names,
                                 "models": sorted(results)})
    for model, res in results.items():
        print(f"regress[{model}]: R2={res.r_squared:.3f} adj={res.adj_r_squared:.3f} n={res.n}")
    return 0


# --- report ---

def cmd_report(cfg: PipelineConfig, args) -> int:
    _require_stage(cfg, "community", "report")
    _require_stage(cfg, "type-metrics", "report")
    outdir = _stage_dir(cfg, "report", create=True)
    from .report import scatter_figure, bar_figure

    header, prows = read_tsv(_stage_dir(cfg, "community") / "profiles.tsv")
    col = {name: i for i, name in enumerate(header)}
    profiles = [{name: row[i] for name, i in col.items()} for row in prows]

    npmi = _read_metric_file(_stage_dir(cfg, "type-metrics") / "npmi.tsv")
    _, vocab_rows = read_tsv(_stage_dir(cfg, "type-metrics") / "vocab.tsv")
    users_of = {(r[0], r[1]): int(r[2]) for r in vocab_rows}

    type_rows = []
    for community in sorted(npmi):
        top = sorted(npmi[community].items(), key=lambda kv: (-kv[1], kv[0]))[:args.top]
        for token, value in top:
            type_rows.append((community, token, users_of.get((community, token), 0), value))
    _tsv(cfg, outdir / "table_type_examples.tsv",
         ("community", "token", "users", "npmi"), type_rows)

    sense_path = _stage_dir(cfg, "sense-metrics") / "word_sense.tsv"
    if sense_path.exists() and _stage_meta_if_present(cfg, "sense-metrics", "report"):
        _, srows = read_tsv(sense_path)
        ranked = sorted(srows, key=lambda r: (-float(r[4]), r[0], r[1]))[:args.top * 5]
        _tsv(cfg, outdir / "table_sense_examples.tsv",
             ("community", "token", "method", "sense_value", "type_npmi"),
             [(r[0], r[1], r[2], float(r[4]),
               npmi.get(r[0], {}).get(r[1], float("nan"))) for r in ranked])

    gloss_report = _stage_dir(cfg, "glossary-eval") / "report.tsv"
    if gloss_report.exists():
        (outdir / "glossary_metrics.tsv").write_text(
            gloss_report.read_text(encoding="utf-8"), encoding="utf-8")
    regress_txt = _stage_dir(cfg, "regress") / "regression.txt"
    if regress_txt.exists():
        (outdir / "regression.txt").write_text(
            regress_txt.read_text(encoding="utf-8"), encoding="utf-8")

    render = not args.no_figures
    stamp = f"config {cfg.config_hash()}"
    summary_lines = [f"communities: {len(profiles)}"]
    attrs = ("size", "activity", "loyalty", "density")
    for attr in attrs:
        pts = [(p["community"], float(p[attr]), float(p["distinctiveness"]))
               for p in profiles if p[attr] != ""]
        if len(pts) >= 2 and len({x for _, x, _ in pts}) > 1:
            zs = stats.zscore([x for _, x, _ in pts])
            pts = [(c, float(z), y) for (c, _x, y), z in zip(pts, zs)]
            scatter_figure(outdir, f"fig_{attr}", pts,
                           xlabel=f"{attr} (z-scored)", ylabel="distinctiveness",
                           render=render, comment=stamp)
            summary_lines.append(f"fig_{attr}: {len(pts)} communities")
    pts = [(p["community"], float(p["sense_fraction"]), float(p["type_fraction"]))
           for p in profiles]
    if len(pts) >= 2:
        title = ""
        xs = [x for _, x, _ in pts]
        ys = [y for _, _, y in pts]
        if len(set(xs)) > 1 and len(set(ys)) > 1:
            _, spearman = stats.correlations(xs, ys)
            title = f"spearman r_s = {spearman:.4f}"
            summary_lines.append(f"sense/type fraction spearman: {spearman:.4f}")
        scatter_figure(outdir, "fig_sense_vs_type", pts,
                       xlabel="fraction of words with specific senses",
                       ylabel="fraction of specific word types",
                       title=title, render=render, comment=stamp)
    if any(p["topic_flag"] != "" for p in profiles):
        topics_path = args.topics or cfg.topics
        if topics_path:
            _, trows = read_tsv(topics_path)
            topic_of = {r[0]: r[1] for r in trows}
            per_topic: dict[str, list[float]] = defaultdict(list)
            for p in profiles:
                topic = topic_of.get(p["community"])
                if topic:
                    per_topic[topic].append(float(p["distinctiveness"]))
            bar_figure(outdir, "fig_topics",
                       [(t, sum(v) / len(v)) for t, v in per_topic.items()],
                       ylabel="mean distinctiveness", render=render,
                       comment=stamp)
    (outdir / "summary.txt").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    _write_meta(cfg, "report", {"figures_rendered": render})
    print(f"report: wrote tables and figures to {outdir}")
    return 0


# --- argument parsing ---

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sociolect",
        description="Quantify community-specific language in comment corpora.",
    )
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--seed", type=int, help="global random seed")
    parser.add_argument("--jobs", type=int, help="parallel workers within a stage")
    parser.add_argument("--out", help="output directory (default runs/default)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse, normalize and sample a raw comment dump")
    p.add_argument("--input", help="line-delimited JSON records (.gz supported)")
    p.add_argument("--strict", action="store_true",
                   help="abort on the first malformed line")

    p = sub.add_parser("type-metrics", help="frequency table and the five type scores")
    p.add_argument("--pos", help="optional POS sidecar (JSONL: id, tags)")

    p = sub.add_parser("wsi-train", help="induce word senses from shards")
    p.add_argument("--shards", help="shard glob(s), comma separated")
    p.add_argument("--method", choices=("kmeans", "spectral", "substitution"))

    p = sub.add_parser("wsi-match", help="assign every occurrence to a sense")
    p.add_argument("--shards", help="shard glob(s), comma separated")

    sub.add_parser("sense-metrics", help="sense NPMI and word sense specificity")

    p = sub.add_parser("community", help="behavioral attributes and distinctiveness")
    p.add_argument("--topics", help="TSV community -> topic")
    p.add_argument("--closeness", action="store_true",
                   help="also write per-user closeness centrality")

    p = sub.add_parser("glossary-eval", help="score user-created glossaries")
    p.add_argument("--glossaries", help="TSV (community, term, definition?)")
    p.add_argument("--suggest", action="store_true",
                   help="write high-scoring non-glossary words")

    p = sub.add_parser("semeval", help="train/match WSI benchmark evaluation")
    p.add_argument("--train-xml", required=True)
    p.add_argument("--test-xml", required=True)
    p.add_argument("--gold-key", required=True)
    p.add_argument("--single-key", help="single-sense key for graded gold labels")
    p.add_argument("--shards", help="representation shards for all instances")
    p.add_argument("--method", choices=("kmeans", "spectral", "substitution", "mfs"))
    p.add_argument("--runs", type=int, default=5)

    p = sub.add_parser("regress", help="OLS of distinctiveness on attributes")
    p.add_argument("--features", default="size,activity,loyalty,density")

    p = sub.add_parser("report", help="summary tables, scatter data and figures")
    p.add_argument("--top", type=int, default=4, help="words per community in tables")
    p.add_argument("--topics", help="TSV community -> topic (for the topic figure)")
    p.add_argument("--no-figures", action="store_true",
                   help="emit delimited data only, skip PNG rendering")

    return parser


_COMMANDS = {
    "ingest": cmd_ingest,
    "type-metrics": cmd_type_metrics,
    "wsi-train": cmd_wsi_train,
    "wsi-match": cmd_wsi_match,
    "sense-metrics": cmd_sense_metrics,
    "community": cmd_community,
    "glossary-eval": cmd_glossary_eval,
    "semeval": cmd_semeval,
    "regress": cmd_regress,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = PipelineConfig.load(
        args.config,
        overrides={"seed": args.seed, "jobs": args.jobs, "out": args.out},
    )
    Path(cfg.out).mkdir(parents=True, exist_ok=True)
    cfg.write_resolved(cfg.out)
    return _COMMANDS[args.command](cfg, args)


if __name__ == "__main__":
    sys.exit(main())
