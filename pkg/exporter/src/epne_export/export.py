"""Core export pipeline: JSONL in, EPNE out.

The encoder is consumed read-only in evaluation mode, so a re-export with
identical inputs is byte-identical. Subword vectors are pooled back to one
row per original token; a token that vanishes under the tokenizer or a
sentence exceeding the positional limit is a hard error, never a silent
truncation.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

EPNE_MAGIC = b"EPNE"
EPNE_VERSION = 1

FIRST = "first"
MEAN = "mean"


class ExportError(Exception):
    """Bad input data or an alignment failure."""


@dataclass
class ExportConfig:
    model: str
    layer: int = -1          # hidden-state index; -1 is the final layer
    pool: str = FIRST        # subword pooling: first subtoken or mean
    batch_size: int = 8
    device: str = "cpu"

    def __post_init__(self):
        if self.pool not in (FIRST, MEAN):
            raise ExportError(f"unknown pooling mode '{self.pool}'")
        if self.batch_size < 1:
            raise ExportError("batch size must be >= 1")


def read_jsonl_sentences(path) -> list[tuple[str, list[str]]]:
    """Minimal reader for the dataset interchange format: one JSON record
    per line with "id" and "tokens" (entity annotations are ignored)."""
    sentences = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                sid = str(record["id"])
                tokens = [str(t) for t in record["tokens"]]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ExportError(f"{path}: line {lineno}: malformed record ({exc})") from None
            if not sid or not tokens or any(not t for t in tokens):
                raise ExportError(f"{path}: line {lineno}: empty id or tokens")
            if sid in seen:
                raise ExportError(f"{path}: duplicate sentence id '{sid}'")
            seen.add(sid)
            sentences.append((sid, tokens))
    return sentences


def write_epne(path, dim: int, rows_by_id: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(EPNE_MAGIC)
        fh.write(struct.pack("<II", EPNE_VERSION, dim))
        fh.write(struct.pack("<Q", len(rows_by_id)))
        for sid, rows in rows_by_id.items():
            raw = sid.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", rows.shape[0]))
            fh.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())


def _pool_subwords(states: np.ndarray, positions: list[int], mode: str) -> np.ndarray:
    if mode == FIRST:
        return states[positions[0]]
    return states[positions].mean(axis=0)


def export(data_path, config: ExportConfig, out_path) -> dict[str, int]:
    """Run the encoder and write the EPNE file.

    Returns {sentence id: token count} for reporting. One embedding row per
    original token; ids and token counts mirror the dataset exactly.
    """
    import torch
    from transformers import AutoModel, AutoTokenizer

    sentences = read_jsonl_sentences(data_path)
    tokenizer = AutoTokenizer.from_pretrained(config.model)
    model = AutoModel.from_pretrained(config.model)
    model.to(config.device)
    model.eval()
    max_positions = getattr(model.config, "max_position_embeddings", None)

    rows_by_id: dict[str, np.ndarray] = {}
    dim = int(model.config.hidden_size)
    with torch.no_grad():
        for lo in range(0, len(sentences), config.batch_size):
            batch = sentences[lo:lo + config.batch_size]
            encoded = tokenizer(
                [tokens for _, tokens in batch],
                is_split_into_words=True,
                padding=True,
                truncation=False,
                return_tensors="pt",
            )
            if max_positions is not None and encoded["input_ids"].shape[1] > max_positions:
                lengths = encoded["attention_mask"].sum(dim=1)
                worst = int(torch.argmax(lengths))
                raise ExportError(
                    f"sentence '{batch[worst][0]}' needs {int(lengths[worst])} encoder "
                    f"positions but the model allows {max_positions}; refusing to truncate"
                )
            encoded = encoded.to(config.device)
            output = model(**encoded, output_hidden_states=True)
            states = output.hidden_states[config.layer].cpu().numpy()
            for i, (sid, tokens) in enumerate(batch):
                word_ids = encoded.word_ids(i)
                positions: dict[int, list[int]] = {}
                for pos, wid in enumerate(word_ids):
                    if wid is not None:
                        positions.setdefault(wid, []).append(pos)
                rows = np.empty((len(tokens), dim), dtype=np.float32)
                for w, token in enumerate(tokens):
                    if w not in positions:
                        raise ExportError(
                            f"sentence '{sid}': token {w} ({token!r}) produced no "
                            f"subwords under the tokenizer"
                        )
                    rows[w] = _pool_subwords(states[i], positions[w], config.pool)
                rows_by_id[sid] = rows
    write_epne(out_path, dim, rows_by_id)
    return {sid: rows.shape[0] for sid, rows in rows_by_id.items()}
