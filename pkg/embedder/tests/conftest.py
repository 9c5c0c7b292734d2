import json
import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).parent))

WORDS = (
    ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
    + list("abcdefghijklmnopqrstuvwxyz")
    + ["play", "##ing", "##er", "python", "space", "rock", "cat", "dog",
       "ship", "code", "the", "big", "fly", "##s", "!", ".", ","]
)


@pytest.fixture(scope="session")
def tiny_model_dir(tmp_path_factory):
    """A randomly initialized 4-layer wordpiece BERT saved to disk."""
    from tokenizers import Tokenizer, normalizers, pre_tokenizers, processors
    from tokenizers.models import WordPiece
    from transformers import BertConfig, BertForMaskedLM, BertTokenizerFast

    vocab = {w: i for i, w in enumerate(WORDS)}
    backend = Tokenizer(WordPiece(vocab, unk_token="[UNK]",
                                  max_input_chars_per_word=100))
    backend.normalizer = normalizers.BertNormalizer(lowercase=True)
    backend.pre_tokenizer = pre_tokenizers.BertPreTokenizer()
    backend.post_processor = processors.TemplateProcessing(
        single="[CLS] $A [SEP]",
        pair="[CLS] $A [SEP] $B [SEP]",
        special_tokens=[("[CLS]", vocab["[CLS]"]), ("[SEP]", vocab["[SEP]"])],
    )
    tokenizer = BertTokenizerFast(
        tokenizer_object=backend, unk_token="[UNK]", pad_token="[PAD]",
        cls_token="[CLS]", sep_token="[SEP]", mask_token="[MASK]")
    config = BertConfig(vocab_size=len(WORDS), hidden_size=16,
                        num_hidden_layers=4, num_attention_heads=2,
                        intermediate_size=32, max_position_embeddings=48)
    torch.manual_seed(0)
    model = BertForMaskedLM(config)
    path = tmp_path_factory.mktemp("model") / "tinybert"
    tokenizer.save_pretrained(path)
    model.save_pretrained(path)
    return str(path)


@pytest.fixture(scope="session")
def backend(tiny_model_dir):
    from sociolect_embedder.extract import load_backend

    return load_backend(tiny_model_dir)


def corpus_record(comment_id, community, author, tokens):
    return json.dumps({
        "id": comment_id, "community": community, "author": author,
        "parent_id": None, "is_top_level": True, "created_at": 0,
        "tokens": list(tokens),
    })


@pytest.fixture()
def tiny_corpus(tmp_path):
    rows = [
        corpus_record("c1", "games", "u1", ["the", "big", "python", "ship"]),
        corpus_record("c2", "games", "u2", ["python", "rock", "flys"]),
        corpus_record("c3", "coding", "u3", ["the", "python", "code", "playing"]),
        corpus_record("c4", "coding", "u1", ["cat", "dog", "python", "!"]),
    ]
    path = tmp_path / "corpus.jsonl"
    path.write_text("\n".join(rows) + "\n")
    return path
