"""Embedding extraction and masked-substitute sampling.

Embeddings are the concatenation of the final four hidden layers at the
target position; a target split into several wordpieces contributes the
elementwise mean of its piece vectors per layer. Substitute representatives
are sampled with replacement from the model's masked-token distribution,
restricted to a top-candidate pool that excludes the target's own pieces,
special tokens, continuation pieces and non-word strings.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch
from transformers import AutoModelForMaskedLM, AutoTokenizer

N_LAYERS = 4
DEFAULT_REPRESENTATIVES = 15
DEFAULT_SUBSTITUTES = 20
DEFAULT_CANDIDATE_POOL = 200


def derive_seed(global_seed: int, *parts: object) -> int:
    payload = "\x1f".join([str(global_seed), *map(str, parts)])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


@dataclass
class ModelBackend:
    """A loaded masked language model plus its tokenizer."""

    tokenizer: object
    model: object
    device: str = "cpu"

    @property
    def hidden_size(self) -> int:
        return self.model.config.hidden_size

    @property
    def output_dim(self) -> int:
        return N_LAYERS * self.hidden_size

    @property
    def max_positions(self) -> int:
        return int(self.model.config.max_position_embeddings)


def load_backend(model_id: str, device: str = "cpu") -> ModelBackend:
    tokenizer = AutoTokenizer.from_pretrained(model_id)
    model = AutoModelForMaskedLM.from_pretrained(model_id)
    model.to(device)
    model.eval()
    return ModelBackend(tokenizer=tokenizer, model=model, device=device)


def _pieces_per_word(backend: ModelBackend, tokens: Sequence[str]) -> list[list[str]]:
    out = []
    for word in tokens:
        pieces = backend.tokenizer.tokenize(word)
        out.append(pieces if pieces else [backend.tokenizer.unk_token])
    return out


def _window(pieces: list[list[str]], position: int, budget: int) -> tuple[int, int]:
    """Word span [lo, hi) around the target fitting the piece budget.

    Expands one word at a time, preferring the side with more words left, so
    the target keeps as much balanced context as the model length allows.
    """
    lo = hi = position
    used = 0
    n = len(pieces)
    while True:
        grew = False
        if hi == lo:  # target word first, trimmed to the budget if oversized
            need = len(pieces[position])
            if need > budget:
                return position, position + 1
            used, lo, hi = need, position, position + 1
            grew = True
        left_ok = lo > 0 and used + len(pieces[lo - 1]) <= budget
        right_ok = hi < n and used + len(pieces[hi]) <= budget
        if left_ok and (not right_ok or (position - lo) <= (hi - 1 - position)):
            lo -= 1
            used += len(pieces[lo])
            grew = True
        elif right_ok:
            used += len(pieces[hi])
            hi += 1
            grew = True
        if not grew:
            return lo, hi


def _encode_window(
    backend: ModelBackend,
    tokens: Sequence[str],
    position: int,
    max_length: int | None,
    mask_target: bool,
) -> tuple[torch.Tensor, list[int]]:
    """Input ids for a window around the target plus the target's positions.

    With ``mask_target`` the target word becomes a single mask token and the
    returned positions hold just that slot.
    """
    tok = backend.tokenizer
    pieces = _pieces_per_word(backend, tokens)
    if mask_target:
        pieces = list(pieces)
        pieces[position] = [tok.mask_token]
    limit = backend.max_positions if max_length is None else min(
        max_length, backend.max_positions)
    budget = limit - 2
    lo, hi = _window(pieces, position, budget)
    flat: list[str] = []
    target_span: list[int] = []
    for w in range(lo, hi):
        word_pieces = pieces[w]
        if w == position:
            word_pieces = word_pieces[:budget]  # oversized target trimmed
            start = len(flat) + 1  # +1 for [CLS]
            target_span = list(range(start, start + len(word_pieces)))
        flat.extend(word_pieces)
    ids = [tok.cls_token_id] + tok.convert_tokens_to_ids(flat) + [tok.sep_token_id]
    return torch.tensor([ids], device=backend.device), target_span


def extract_embedding(
    backend: ModelBackend,
    tokens: Sequence[str],
    position: int,
    max_length: int | None = None,
) -> np.ndarray:
    """Final-four-layer concatenation at the target, pieces averaged per layer."""
    input_ids, span = _encode_window(backend, tokens, position, max_length,
                                     mask_target=False)
    with torch.no_grad():
        out = backend.model(input_ids=input_ids, output_hidden_states=True)
    layers = out.hidden_states[-N_LAYERS:]
    chunks = [layer[0, span].mean(dim=0) for layer in layers]
    return torch.cat(chunks).cpu().numpy().astype(np.float32)


def _candidate_pool(
    backend: ModelBackend,
    logits: torch.Tensor,
    target_pieces: set[str],
    pool: int,
) -> tuple[list[int], np.ndarray]:
    """Top candidate ids and renormalized probabilities for substitution."""
    tok = backend.tokenizer
    special = set(tok.all_special_ids)
    order = torch.argsort(logits, descending=True).tolist()
    kept: list[int] = []
    for idx in order:
        if idx in special:
            continue
        text = tok.convert_ids_to_tokens(idx)
        if text.startswith("##"):
            continue
        if text in target_pieces or not any(ch.isalnum() for ch in text):
            continue
        kept.append(idx)
        if len(kept) == pool:
            break
    if not kept:
        raise ValueError("no admissible substitute candidates")
    weights = torch.softmax(logits[kept], dim=0).cpu().numpy().astype(np.float64)
    weights /= weights.sum()
    return kept, weights


def sample_substitutes(
    backend: ModelBackend,
    tokens: Sequence[str],
    position: int,
    n_reps: int = DEFAULT_REPRESENTATIVES,
    n_subs: int = DEFAULT_SUBSTITUTES,
    seed: int = 0,
    pool: int = DEFAULT_CANDIDATE_POOL,
    max_length: int | None = None,
) -> list[list[str]]:
    """``n_reps`` independent multisets of ``n_subs`` sampled substitutes."""
    input_ids, span = _encode_window(backend, tokens, position, max_length,
                                     mask_target=True)
    with torch.no_grad():
        out = backend.model(input_ids=input_ids)
    logits = out.logits[0, span[0]]
    target_pieces = set(backend.tokenizer.tokenize(tokens[position]))
    target_pieces.add(tokens[position])
    kept, weights = _candidate_pool(backend, logits, target_pieces, pool)
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(kept), size=(n_reps, n_subs), replace=True, p=weights)
    id_to_tok = backend.tokenizer.convert_ids_to_tokens
    return [[id_to_tok(kept[int(j)]) for j in row] for row in draws]
