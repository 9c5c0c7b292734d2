import hashlib
import json
import os
from pathlib import Path

import numpy as np
import pytest

from sociolect.cli import main
from sociolect.config import PipelineConfig
from sociolect.ingest import read_corpus
from sociolect.shards import write_embedding_shard
from sociolect.util import read_tsv
from sociolect.wsi import Occurrence

from helpers import toy_raw_corpus


def write_config(path, **kv):
    path.write_text("".join(f"{k} = {v}\n" for k, v in kv.items()))
    return str(path)


def toy_config(tmp_path, out, raw):
    return write_config(
        tmp_path / "toy.cfg",
        corpus=raw,
        out=out,
        seed=11,
        sample_size=2000,
        sense_min_total=50,
        sense_min_breadth=2,
        gamma=10000.0,
    )


def planted_shards(corpus_path, shard_path, token="poly", dim=16, scale=60.0):
    """Embeddings for every occurrence of `token`, one blob per community."""
    with open(corpus_path, encoding="utf-8") as fh:
        comments = list(read_corpus(fh))
    communities = sorted({c.community for c in comments})
    rng = np.random.default_rng(99)
    centers = {}
    for i, name in enumerate(communities):
        center = np.zeros(dim)
        center[i % dim] = scale
        centers[name] = center
    entries = {}
    for comment in comments:
        for pos, tok in enumerate(comment.tokens):
            if tok == token:
                occ = Occurrence(token=token, community=comment.community,
                                 comment_id=comment.comment_id, position=pos,
                                 user=comment.author)
                entries[occ] = centers[comment.community] + rng.normal(0, 1, dim)
    write_embedding_shard(entries, shard_path)
    return entries


def dir_hashes(root, skip=("config.resolved",)):
    out = {}
    for path in sorted(Path(root).rglob("*")):
        if path.is_file() and path.name not in skip:
            out[str(path.relative_to(root))] = hashlib.sha256(
                path.read_bytes()).hexdigest()
    return out


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """Run the full toy pipeline once; tests inspect its artifacts."""
    root = tmp_path_factory.mktemp("toy")
    raw = root / "raw.jsonl"
    communities, jargon = toy_raw_corpus(raw)
    out = root / "run"
    cfg_path = toy_config(root, out, raw)

    gloss = root / "glossaries.tsv"
    rows = []
    for name in communities:
        for term in jargon[name]:
            rows.append(f"{name}\t{term}\tplanted jargon")
        rows.append(f"{name}\tunseenterm{name}\tnever used")
        rows.append(f"{name}\tmulti word entry\tdropped")
    gloss.write_text("\n".join(rows) + "\n")

    topics = root / "topics.tsv"
    topics.write_text("community\ttopic\n" + "\n".join(
        f"{name}\t{'Technology' if i == 0 else 'News'}"
        for i, name in enumerate(communities)) + "\n")

    assert main(["--config", cfg_path, "ingest"]) == 0
    shard = root / "poly.embs"
    planted_shards(out / "ingest" / "corpus_sampled.jsonl", shard)
    assert main(["--config", cfg_path, "type-metrics"]) == 0
    assert main(["--config", cfg_path, "wsi-train", "--shards", str(shard)]) == 0
    assert main(["--config", cfg_path, "wsi-match", "--shards", str(shard)]) == 0
    assert main(["--config", cfg_path, "sense-metrics"]) == 0
    assert main(["--config", cfg_path, "community", "--topics", str(topics)]) == 0
    assert main(["--config", cfg_path, "glossary-eval", "--glossaries",
                 str(gloss), "--suggest"]) == 0
    assert main(["--config", cfg_path, "regress", "--features", "size"]) == 0
    assert main(["--config", cfg_path, "report", "--topics", str(topics)]) == 0
    return {"root": root, "out": out, "cfg": cfg_path, "raw": raw,
            "communities": communities, "jargon": jargon,
            "gloss": gloss, "topics": topics, "shard": shard}


class TestPipelineArtifacts:
    EXPECTED = [
        "config.resolved",
        "ingest/corpus_full.jsonl",
        "ingest/corpus_sampled.jsonl",
        "type_metrics/pmi.tsv",
        "type_metrics/npmi.tsv",
        "type_metrics/tfidf.tsv",
        "type_metrics/textrank.tsv",
        "type_metrics/jsd.tsv",
        "type_metrics/vocab.tsv",
        "wsi_train/index.tsv",
        "wsi_match/assignments.tsv",
        "sense_metrics/word_sense.tsv",
        "sense_metrics/sense_counts.tsv",
        "community/profiles.tsv",
        "glossary_eval/report.tsv",
        "glossary_eval/suggestions.tsv",
        "regress/regression.tsv",
        "regress/regression.txt",
        "report/table_type_examples.tsv",
        "report/table_sense_examples.tsv",
        "report/summary.txt",
        "report/fig_size.tsv",
        "report/fig_size.png",
        "report/fig_sense_vs_type.tsv",
        "report/fig_sense_vs_type.png",
        "report/fig_topics.png",
    ]

    def test_all_artifacts_present(self, pipeline):
        for rel in self.EXPECTED:
            assert (pipeline["out"] / rel).exists(), rel

    def test_planted_jargon_tops_npmi(self, pipeline):
        _, rows = read_tsv(pipeline["out"] / "type_metrics" / "npmi.tsv")
        best = {}
        for community, token, _m, value in rows:
            value = float(value)
            if community not in best or value > best[community][1]:
                best[community] = (token, value)
        for name in pipeline["communities"]:
            assert best[name][0] in pipeline["jargon"][name]

    def test_sense_models_cover_poly(self, pipeline):
        _, rows = read_tsv(pipeline["out"] / "wsi_train" / "index.tsv")
        assert any(r[0] == "poly" for r in rows)

    def test_poly_senses_are_community_specific(self, pipeline):
        _, rows = read_tsv(pipeline["out"] / "sense_metrics" / "word_sense.tsv")
        poly = {r[0]: float(r[4]) for r in rows if r[1] == "poly"}
        assert set(poly) == set(pipeline["communities"])
        assert all(v > 0.2 for v in poly.values())

    def test_poly_type_npmi_near_zero(self, pipeline):
        _, rows = read_tsv(pipeline["out"] / "type_metrics" / "npmi.tsv")
        vals = [float(r[3]) for r in rows if r[1] == "poly"]
        assert vals and all(abs(v) < 0.08 for v in vals)

    def test_profiles_have_all_fields(self, pipeline):
        header, rows = read_tsv(pipeline["out"] / "community" / "profiles.tsv")
        assert header == ["community", "size", "activity", "loyalty", "density",
                          "distinctiveness", "type_fraction", "sense_fraction",
                          "topic_flag"]
        assert len(rows) == len(pipeline["communities"])
        sizes = {r[0]: int(r[1]) for r in rows}
        assert len(set(sizes.values())) == 3
        flags = {r[0]: r[8] for r in rows}
        assert flags[pipeline["communities"][0]] == "1"

    def test_glossary_report_ranks_npmi_high(self, pipeline):
        _, rows = read_tsv(pipeline["out"] / "glossary_eval" / "report.tsv")
        metrics = {r[0]: float(r[1]) for r in rows}
        assert metrics["npmi"] >= 0.5
        assert "sense_kmeans" in metrics

    def test_meta_counts_dropped_glossary_entries(self, pipeline):
        meta = json.loads(
            (pipeline["out"] / "glossary_eval" / "_meta.json").read_text())
        assert meta["dropped_multiword"] == len(pipeline["communities"])
        assert meta["terms_missing_from_corpus"] == len(pipeline["communities"])

    def test_resolved_config_written(self, pipeline):
        text = (pipeline["out"] / "config.resolved").read_text()
        assert "seed = 11" in text

    def test_every_meta_carries_same_hash(self, pipeline):
        hashes = set()
        for meta_path in pipeline["out"].rglob("_meta.json"):
            hashes.add(json.loads(meta_path.read_text())["config_hash"])
        assert len(hashes) == 1


class TestStageOrdering:
    def test_match_before_train_names_stage(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        toy_raw_corpus(raw, n_communities=2, comments_per_community=30)
        cfg = toy_config(tmp_path, tmp_path / "run", raw)
        assert main(["--config", cfg, "ingest"]) == 0
        with pytest.raises(SystemExit, match="wsi-train"):
            main(["--config", cfg, "wsi-match", "--shards", "none*.bin"])

    def test_type_metrics_requires_ingest(self, tmp_path):
        cfg = toy_config(tmp_path, tmp_path / "empty_run", tmp_path / "raw.jsonl")
        with pytest.raises(SystemExit, match="ingest"):
            main(["--config", cfg, "type-metrics"])

    def test_mixed_config_hash_rejected(self, tmp_path):
        raw = tmp_path / "raw.jsonl"
        toy_raw_corpus(raw, n_communities=2, comments_per_community=30)
        out = tmp_path / "run"
        cfg = toy_config(tmp_path, out, raw)
        assert main(["--config", cfg, "ingest"]) == 0
        with pytest.raises(SystemExit, match="config hash"):
            main(["--config", cfg, "--seed", "99", "type-metrics"])


class TestDeterminism:
    def test_rerun_is_byte_identical(self, pipeline):
        out = pipeline["out"]
        cfg = pipeline["cfg"]
        before = dir_hashes(out)
        for argv in (
            ["--config", cfg, "ingest"],
            ["--config", cfg, "type-metrics"],
            ["--config", cfg, "wsi-train", "--shards", str(pipeline["shard"])],
            ["--config", cfg, "wsi-match", "--shards", str(pipeline["shard"])],
            ["--config", cfg, "sense-metrics"],
            ["--config", cfg, "community", "--topics", str(pipeline["topics"])],
            ["--config", cfg, "glossary-eval", "--glossaries",
             str(pipeline["gloss"]), "--suggest"],
            ["--config", cfg, "regress", "--features", "size"],
            ["--config", cfg, "report", "--topics", str(pipeline["topics"])],
        ):
            assert main(argv) == 0
        assert dir_hashes(out) == before


class TestConfig:
    def test_defaults_and_file(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# comment\nsample_size = 123\ngamma = 5.5\n")
        cfg = PipelineConfig.load(path, env={})
        assert cfg.sample_size == 123
        assert cfg.gamma == 5.5
        assert cfg.knn == 7

    def test_env_override(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("sample_size = 123\n")
        cfg = PipelineConfig.load(path, env={"SOCIOLECT_SAMPLE_SIZE": "77"})
        assert cfg.sample_size == 77

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("no_such_key = 1\n")
        with pytest.raises(ValueError, match="no_such_key"):
            PipelineConfig.load(path, env={})

    def test_hash_ignores_out_and_jobs(self):
        a = PipelineConfig.load(None, overrides={"out": "x", "jobs": 4}, env={})
        b = PipelineConfig.load(None, overrides={"out": "y", "jobs": 1}, env={})
        assert a.config_hash() == b.config_hash()
        c = PipelineConfig.load(None, overrides={"seed": 5}, env={})
        assert c.config_hash() != a.config_hash()

    def test_invalid_method_rejected(self):
        with pytest.raises(ValueError, match="wsi_method"):
            PipelineConfig.load(None, overrides={"wsi_method": "magic"}, env={})


def test_parallel_jobs_match_serial(tmp_path):
    raw = tmp_path / "raw.jsonl"
    toy_raw_corpus(raw, n_communities=2, comments_per_community=120)
    outs = {}
    for jobs, name in ((1, "serial"), (2, "parallel")):
        out = tmp_path / name
        cfg = write_config(tmp_path / f"{name}.cfg", corpus=raw, out=out,
                           seed=3, sample_size=500, sense_min_total=20,
                           sense_min_breadth=2, jobs=jobs)
        assert main(["--config", cfg, "ingest"]) == 0
        shard = tmp_path / f"{name}.embs"
        planted_shards(out / "ingest" / "corpus_sampled.jsonl", shard)
        assert main(["--config", cfg, "type-metrics"]) == 0
        assert main(["--config", cfg, "wsi-train", "--shards", str(shard)]) == 0
        outs[name] = out
    h1 = dir_hashes(outs["serial"])
    h2 = dir_hashes(outs["parallel"])
    assert h1 == h2


SEMEVAL_XML = """<root>
  <lexelt item="{lemma}">
{instances}
  </lexelt>
</root>"""


def write_semeval_fixture(tmp_path, lemma="cold.a", n_train=40, n_test=20):
    """Planted two-sense lemma: XML files, gold key, embedding shard."""
    rng = np.random.default_rng(0)
    center = {0: np.r_[np.full(4, 30.0), np.zeros(4)],
              1: np.r_[np.zeros(4), np.full(4, 30.0)]}

    def instances(prefix, n):
        items, gold, vectors = [], {}, {}
        for i in range(n):
            iid = f"{lemma}.{prefix}{i}"
            sense = i % 2
            items.append(f'    <instance id="{iid}">'
                         f"<context>word number <head>cold</head> here</context>"
                         f"</instance>")
            gold[iid] = f"{lemma}.gold{sense}"
            vectors[iid] = center[sense] + rng.normal(0, 1, 8)
        return "\n".join(items), gold, vectors

    train_items, _, train_vecs = instances("tr", n_train)
    test_items, test_gold, test_vecs = instances("te", n_test)
    (tmp_path / "train.xml").write_text(
        SEMEVAL_XML.format(lemma=lemma, instances=train_items))
    (tmp_path / "test.xml").write_text(
        SEMEVAL_XML.format(lemma=lemma, instances=test_items))
    (tmp_path / "gold.key").write_text("".join(
        f"{lemma} {iid} {sense}\n" for iid, sense in test_gold.items()))
    entries = {}
    for iid, vec in {**train_vecs, **test_vecs}.items():
        entries[Occurrence(token=lemma, community="semeval", comment_id=iid,
                           position=0, user=iid)] = vec
    shard = tmp_path / "semeval.embs"
    write_embedding_shard(entries, shard)
    return shard


class TestSemevalCommand:
    def test_planted_lemma_perfect_scores(self, tmp_path):
        shard = write_semeval_fixture(tmp_path)
        cfg = write_config(tmp_path / "c.cfg", out=tmp_path / "run", seed=2,
                           gamma=500.0)
        assert main([
            "--config", str(tmp_path / "c.cfg"), "semeval",
            "--train-xml", str(tmp_path / "train.xml"),
            "--test-xml", str(tmp_path / "test.xml"),
            "--gold-key", str(tmp_path / "gold.key"),
            "--shards", str(shard), "--method", "kmeans", "--runs", "2",
        ]) == 0
        _, rows = read_tsv(tmp_path / "run" / "semeval" / "results.tsv")
        means = {r[1]: float(r[2]) for r in rows}
        stds = {r[1]: float(r[3]) for r in rows}
        for measure in ("fscore", "vmeasure", "nmi", "bcubed"):
            assert means[measure] == pytest.approx(1.0)
            assert stds[measure] == pytest.approx(0.0)

    def test_mfs_needs_no_shards(self, tmp_path):
        write_semeval_fixture(tmp_path)
        cfg = write_config(tmp_path / "c.cfg", out=tmp_path / "run", seed=2)
        assert main([
            "--config", str(tmp_path / "c.cfg"), "semeval",
            "--train-xml", str(tmp_path / "train.xml"),
            "--test-xml", str(tmp_path / "test.xml"),
            "--gold-key", str(tmp_path / "gold.key"),
            "--method", "mfs", "--runs", "1",
        ]) == 0
        _, rows = read_tsv(tmp_path / "run" / "semeval" / "results.tsv")
        means = {r[1]: float(r[2]) for r in rows}
        assert means["vmeasure"] == 0.0


def test_pos_sidecar_restricts_textrank(tmp_path):
    raw = tmp_path / "raw.jsonl"
    toy_raw_corpus(raw, n_communities=2, comments_per_community=40)
    out = tmp_path / "run"
    cfg = write_config(tmp_path / "c.cfg", corpus=raw, out=out, seed=1,
                       sample_size=100)
    assert main(["--config", str(tmp_path / "c.cfg"), "ingest"]) == 0
    # tag only the first two comments of each community as all-noun
    sidecar = tmp_path / "pos.jsonl"
    with open(out / "ingest" / "corpus_sampled.jsonl", encoding="utf-8") as fh:
        comments = list(read_corpus(fh))
    seen = {}
    lines = []
    tagged_tokens = set()
    for c in comments:
        if seen.get(c.community, 0) < 2:
            lines.append(json.dumps({"id": c.comment_id,
                                     "tags": ["NOUN"] * len(c.tokens)}))
            tagged_tokens.update(c.tokens)
            seen[c.community] = seen.get(c.community, 0) + 1
    sidecar.write_text("\n".join(lines) + "\n")
    assert main(["--config", str(tmp_path / "c.cfg"), "type-metrics",
                 "--pos", str(sidecar)]) == 0
    _, rows = read_tsv(out / "type_metrics" / "textrank.tsv")
    assert rows, "tagged comments should produce textrank scores"
    assert all(r[1] in tagged_tokens for r in rows)
