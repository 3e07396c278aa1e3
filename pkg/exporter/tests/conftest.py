"""Shared fixture: a tiny randomly-initialized local encoder so the export
pipeline runs offline; weights are seeded once and reloaded from disk."""

import json

import pytest
import torch
from transformers import BertConfig, BertModel, BertTokenizerFast

VOCAB = [
    "[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]",
    "it", "might", "rain", "tonight", "the", "sun", "warm", "##ly",
    "now", "cold", "##er", "a", "b", "c", "d", "e",
]


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("tiny_encoder")
    vocab_path = root / "vocab.txt"
    vocab_path.write_text("\n".join(VOCAB) + "\n", encoding="utf-8")
    tokenizer = BertTokenizerFast(str(vocab_path), do_lower_case=True)
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=32,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=37,
        max_position_embeddings=16,
    )
    torch.manual_seed(1234)
    model = BertModel(config)
    model.eval()
    model.save_pretrained(root)
    tokenizer.save_pretrained(root)
    return str(root)


@pytest.fixture()
def fixture_dataset(tmp_path):
    """Three sentences; 'warmly' splits into two subwords."""
    path = tmp_path / "data.jsonl"
    records = [
        {"id": "s1", "tokens": ["It", "might", "rain", "tonight"], "entities": [
            {"start": 2, "end": 3, "type": "Weather"},
            {"start": 3, "end": 4, "type": "Time"},
        ]},
        {"id": "s2", "tokens": ["the", "sun", "warmly"], "entities": []},
        {"id": "s3", "tokens": ["rain"], "entities": []},
    ]
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")
    return path
