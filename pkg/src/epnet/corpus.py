"""Data model for sentences, entities, spans and datasets, plus ingestion.

Token indices are 0-based with end-exclusive entities throughout; spans are
(start, length) pairs bounded by the configured length threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import DataError

NONE_TYPE = "None"
MAX_ENTITY_TYPES = 100


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]

    def __post_init__(self):
        if not self.id:
            raise DataError("sentence id must be non-empty")
        if len(self.tokens) < 1:
            raise DataError(f"sentence '{self.id}' has no tokens")
        if any(not tok for tok in self.tokens):
            raise DataError(f"sentence '{self.id}' contains an empty token")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class Entity:
    start: int  # inclusive
    end: int    # exclusive
    type_name: str

    def __post_init__(self):
        if self.start < 0 or self.end <= self.start:
            raise DataError(f"entity bounds ({self.start}, {self.end}) are invalid")
        if not self.type_name or self.type_name == NONE_TYPE:
            raise DataError(f"gold entity type {self.type_name!r} is not allowed")

    @property
    def length(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class Span:
    sentence_id: str
    start: int
    length: int

    def __post_init__(self):
        if self.start < 0 or self.length < 1:
            raise DataError(f"span (start={self.start}, length={self.length}) is invalid")

    @property
    def end(self) -> int:
        return self.start + self.length


@dataclass(frozen=True)
class TypeSystem:
    """Ordered entity-type names; the None type is implicit at reserved index 0."""

    names: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise DataError("entity type names must be distinct")
        if any(not n or n == NONE_TYPE for n in self.names):
            raise DataError("entity type names must be non-empty and not the None sentinel")
        if len(self.names) > MAX_ENTITY_TYPES:
            raise DataError(f"{len(self.names)} entity types exceed the maximum of {MAX_ENTITY_TYPES}")

    @classmethod
    def from_names(cls, names) -> "TypeSystem":
        return cls(tuple(names))

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self):
        return iter(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self.names


@dataclass
class Dataset:
    sentences: list[Sentence]
    annotations: dict[str, list[Entity]]
    type_system: TypeSystem
    _by_id: dict[str, Sentence] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self._by_id = {}
        for sent in self.sentences:
            if sent.id in self._by_id:
                raise DataError(f"duplicate sentence id '{sent.id}'")
            self._by_id[sent.id] = sent
        for sid, entities in self.annotations.items():
            if sid not in self._by_id:
                raise DataError(f"annotations reference unknown sentence id '{sid}'")
            n = len(self._by_id[sid])
            for ent in entities:
                if ent.end > n:
                    raise DataError(
                        f"sentence '{sid}': entity ({ent.start}, {ent.end}) exceeds token count {n}"
                    )
                if ent.type_name not in self.type_system:
                    raise DataError(
                        f"sentence '{sid}': entity type '{ent.type_name}' not in the type system"
                    )

    def __len__(self) -> int:
        return len(self.sentences)

    def sentence(self, sentence_id: str) -> Sentence:
        try:
            return self._by_id[sentence_id]
        except KeyError:
            raise DataError(f"unknown sentence id '{sentence_id}'") from None

    def entities(self, sentence_id: str) -> list[Entity]:
        return self.annotations.get(sentence_id, [])


def load_type_file(path) -> tuple[str, ...]:
    """One type name per line, order significant; blank lines ignored."""
    names = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        name = line.strip()
        if name:
            names.append(name)
    return tuple(names)


def load_jsonl(path, type_names=None) -> Dataset:
    """Load a dataset from JSONL records {"id", "tokens", "entities"}.

    The type system is the sorted set of entity types encountered unless an
    explicit ordered name sequence is supplied.
    """
    sentences: list[Sentence] = []
    annotations: dict[str, list[Entity]] = {}
    seen_types: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
            try:
                sent = Sentence(id=str(record["id"]), tokens=tuple(record["tokens"]))
                entities = [
                    Entity(start=int(e["start"]), end=int(e["end"]), type_name=str(e["type"]))
                    for e in record.get("entities", [])
                ]
            except KeyError as exc:
                raise DataError(f"{path}: line {lineno}: missing field {exc}") from None
            except (TypeError, ValueError) as exc:
                raise DataError(f"{path}: line {lineno}: malformed record ({exc})") from None
            sentences.append(sent)
            if entities:
                annotations[sent.id] = entities
                seen_types.update(e.type_name for e in entities)
    if type_names is None:
        type_names = tuple(sorted(seen_types))
    return Dataset(sentences, annotations, TypeSystem.from_names(type_names))


def save_jsonl(dataset: Dataset, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for sent in dataset.sentences:
            record = {
                "id": sent.id,
                "tokens": list(sent.tokens),
                "entities": [
                    {"start": e.start, "end": e.end, "type": e.type_name}
                    for e in dataset.entities(sent.id)
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def decode_bio(tags) -> list[Entity]:
    """Convert a BIO tag sequence to entities.

    Ill-formed I-without-B runs are repaired by treating the first I as B;
    an I whose type differs from the open run also starts a new entity.
    """
    entities: list[Entity] = []
    open_start = None
    open_type = None

    def close(end):
        nonlocal open_start, open_type
        if open_type is not None:
            entities.append(Entity(open_start, end, open_type))
        open_start = open_type = None

    for i, tag in enumerate(tags):
        if tag == "O":
            close(i)
            continue
        if len(tag) < 3 or tag[1] != "-" or tag[0] not in "BI":
            raise DataError(f"unknown BIO tag '{tag}' at position {i}")
        prefix, name = tag[0], tag[2:]
        if prefix == "B" or open_type != name:
            close(i)
            open_start, open_type = i, name
    close(len(tags))
    return entities


def encode_bio(n: int, entities) -> list[str]:
    """Inverse of decode_bio for flat, non-overlapping gold entities."""
    tags = ["O"] * n
    for ent in sorted(entities, key=lambda e: e.start):
        if any(tags[i] != "O" for i in range(ent.start, ent.end)):
            raise DataError("overlapping entities cannot be BIO-encoded")
        tags[ent.start] = f"B-{ent.type_name}"
        for i in range(ent.start + 1, ent.end):
            tags[i] = f"I-{ent.type_name}"
    return tags


def load_conll_bio(path, type_names=None) -> Dataset:
    """Load a two-column token/tag file with blank-line sentence separators."""
    sentences: list[Sentence] = []
    annotations: dict[str, list[Entity]] = {}
    seen_types: set[str] = set()
    tokens: list[str] = []
    tags: list[str] = []

    def flush():
        if not tokens:
            return
        sid = f"s{len(sentences)}"
        sent = Sentence(id=sid, tokens=tuple(tokens))
        entities = decode_bio(tags)
        sentences.append(sent)
        if entities:
            annotations[sid] = entities
            seen_types.update(e.type_name for e in entities)
        tokens.clear()
        tags.clear()

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                flush()
                continue
            parts = line.split()
            if len(parts) < 2:
                raise DataError(f"{path}: line '{line}' lacks a token/tag pair")
            tokens.append(parts[0])
            tags.append(parts[-1])
    flush()
    if not sentences:
        raise DataError(f"{path}: empty document")
    if type_names is None:
        type_names = tuple(sorted(seen_types))
    return Dataset(sentences, annotations, TypeSystem.from_names(type_names))


def enumerate_spans(sentence: Sentence, epsilon: int) -> list[Span]:
    """All spans up to the length threshold, shortest lengths first.

    Count is n*eps - eps*(eps-1)/2 when n >= eps, else n*(n+1)/2.
    """
    if epsilon < 1:
        raise DataError(f"span length threshold must be >= 1, got {epsilon}")
    n = len(sentence)
    spans = []
    for length in range(1, min(epsilon, n) + 1):
        for start in range(0, n - length + 1):
            spans.append(Span(sentence.id, start, length))
    return spans


def spans_overlap(a: Span, b: Span) -> bool:
    """True iff the half-open token intervals of two same-sentence spans intersect."""
    if a.sentence_id != b.sentence_id:
        raise DataError(
            f"cannot compare spans of different sentences ('{a.sentence_id}' vs '{b.sentence_id}')"
        )
    return a.start < b.end and b.start < a.end
