"""Extraction CLI: tokenized corpus in, representation shards out."""

from __future__ import annotations

import argparse
import sys

from .corpus import load_vocab, read_corpus
from .extract import (
    DEFAULT_CANDIDATE_POOL,
    DEFAULT_REPRESENTATIVES,
    DEFAULT_SUBSTITUTES,
    derive_seed,
    extract_embedding,
    load_backend,
    sample_substitutes,
)
from .shardio import OccurrenceKey, write_embedding_shard, write_representative_shard


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sociolect-embedder",
        description="Produce embedding or substitute shards from a tokenized corpus.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("extract", help="run the model over vocabulary occurrences")
    p.add_argument("--mode", choices=("embed", "subst"), required=True)
    p.add_argument("--model", required=True, help="pretrained model id or path")
    p.add_argument("--vocab", required=True, help="target tokens, one per line")
    p.add_argument("--corpus", required=True, help="canonical tokenized corpus (JSONL)")
    p.add_argument("--out", required=True, help="shard file to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--device", default="cpu")
    p.add_argument("--max-length", type=int, default=128,
                   help="context window budget in wordpieces")
    p.add_argument("--limit", type=int, default=0,
                   help="stop after this many occurrences (0 = all)")
    p.add_argument("--reps", type=int, default=DEFAULT_REPRESENTATIVES)
    p.add_argument("--subs", type=int, default=DEFAULT_SUBSTITUTES)
    p.add_argument("--pool", type=int, default=DEFAULT_CANDIDATE_POOL)
    return parser


def cmd_extract(args) -> int:
    vocab = load_vocab(args.vocab)
    backend = load_backend(args.model, args.device)
    embeddings = {}
    representatives = {}
    n = 0
    for comment in read_corpus(args.corpus):
        for position, token in enumerate(comment.tokens):
            if token not in vocab:
                continue
            key = OccurrenceKey(token=token, community=comment.community,
                                comment_id=comment.comment_id,
                                position=position, user=comment.author)
            if args.mode == "embed":
                embeddings[key] = extract_embedding(
                    backend, comment.tokens, position, args.max_length)
            else:
                representatives[key] = sample_substitutes(
                    backend, comment.tokens, position,
                    n_reps=args.reps, n_subs=args.subs,
                    seed=derive_seed(args.seed, comment.comment_id, position),
                    pool=args.pool, max_length=args.max_length)
            n += 1
            if args.limit and n >= args.limit:
                break
        if args.limit and n >= args.limit:
            break
    if args.mode == "embed":
        write_embedding_shard(embeddings, args.out, dim=backend.output_dim)
    else:
        write_representative_shard(representatives, args.out,
                                   n_reps=args.reps, n_subs=args.subs)
    print(f"extract[{args.mode}]: wrote {n} occurrences to {args.out}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return cmd_extract(args)


if __name__ == "__main__":
    sys.exit(main())
