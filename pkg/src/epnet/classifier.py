"""Span-prototype similarity, decoding, classification loss with gradients,
None-span sampling, overlap removal, and prediction IO."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .corpus import Sentence, Span, spans_overlap
from .errors import DataError, NumericError
from .prototypes import DistanceLossReport, PrototypeBank
from .seeding import derive_seed

EUCLIDEAN = "euclidean"
COSINE = "cosine"


@dataclass
class SimilarityRow:
    """Distances from one projected span to every assigned prototype.

    Positions are aligned with `slots` (ascending slot indices, None first).
    """

    span: Span | None
    slots: tuple[int, ...]
    type_names: tuple[str, ...]
    distances: np.ndarray
    probabilities: np.ndarray
    projected: np.ndarray = field(repr=False, default=None)

    @property
    def logits(self) -> np.ndarray:
        return -self.distances


@dataclass
class Prediction:
    span: Span
    type_name: str
    distance: float
    slot: int = 0


@dataclass
class TrainingBatch:
    spans: list[Span | None]
    gold_slots: list[int]

    def __post_init__(self):
        if len(self.spans) != len(self.gold_slots):
            raise DataError("spans and gold slots must align")
        if not self.gold_slots:
            raise DataError("a training batch needs at least one span instance")

    @property
    def size(self) -> int:
        return len(self.gold_slots)


def _distances(projected: np.ndarray, prototypes: np.ndarray, mode: str) -> np.ndarray:
    if mode == EUCLIDEAN:
        diff = prototypes - projected[None, :]
        return (diff * diff).sum(axis=1)
    if mode == COSINE:
        v_norm = float(np.linalg.norm(projected))
        p_norms = np.linalg.norm(prototypes, axis=1)
        cos = np.zeros(prototypes.shape[0], dtype=np.float64)
        ok = (p_norms > 0.0) & (v_norm > 0.0)
        cos[ok] = (prototypes[ok] @ projected) / (p_norms[ok] * v_norm)
        return 1.0 - cos
    raise DataError(f"unknown similarity mode '{mode}'")


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max()
    return shifted - math.log(float(np.exp(shifted).sum()))


def similarity(
    projected: np.ndarray,
    bank: PrototypeBank,
    span: Span | None = None,
    mode: str = EUCLIDEAN,
) -> SimilarityRow:
    projected = np.asarray(projected, dtype=np.float64)
    if projected.shape != (bank.d1,):
        raise DataError(
            f"projected vector has shape {projected.shape}, expected ({bank.d1},)"
        )
    slots = tuple(bank.assigned_slots())
    names = tuple(bank.type_of_slot(s) for s in slots)
    distances = _distances(projected, bank.vectors[list(slots)], mode)
    probabilities = np.exp(_log_softmax(-distances))
    return SimilarityRow(
        span=span,
        slots=slots,
        type_names=names,
        distances=distances,
        probabilities=probabilities,
        projected=projected,
    )


def decode(row: SimilarityRow) -> Prediction:
    """Minimal-distance slot; exact ties go to the smallest slot index."""
    pos = int(np.argmin(row.distances))
    return Prediction(
        span=row.span,
        type_name=row.type_names[pos],
        distance=float(row.distances[pos]),
        slot=row.slots[pos],
    )


@dataclass
class ClassificationGrads:
    loss: float
    span_grads: np.ndarray       # (M, d1) gradient w.r.t. each projected span vector
    prototype_grads: np.ndarray  # (num_slots, d1); zero rows at unassigned slots


def classification_loss(
    batch: TrainingBatch,
    rows: list[SimilarityRow],
    bank: PrototypeBank,
    mode: str = EUCLIDEAN,
) -> ClassificationGrads:
    """Cross-entropy over softmax(-distance) logits, averaged over instances,
    with gradients flowing into both the span vectors and the assigned
    prototypes."""
    if len(rows) != batch.size:
        raise DataError(f"{len(rows)} similarity rows for {batch.size} batch instances")
    m = batch.size
    loss = 0.0
    span_grads = np.zeros((m, bank.d1), dtype=np.float64)
    proto_grads = np.zeros_like(bank.vectors)
    for j, (row, gold_slot) in enumerate(zip(rows, batch.gold_slots)):
        try:
            gold_pos = row.slots.index(gold_slot)
        except ValueError:
            raise DataError(f"gold slot {gold_slot} is not assigned in the bank") from None
        logp = _log_softmax(-row.distances)
        loss -= float(logp[gold_pos])
        # dL/d distance_i = (y_i - p_i) / M
        coef = -row.probabilities / m
        coef[gold_pos] += 1.0 / m
        v = row.projected
        protos = bank.vectors[list(row.slots)]
        if mode == EUCLIDEAN:
            diff = v[None, :] - protos           # dd_i/dv = 2 diff_i
            span_grads[j] = 2.0 * coef @ diff
            per_proto = -2.0 * coef[:, None] * diff
        elif mode == COSINE:
            v_norm = float(np.linalg.norm(v))
            p_norms = np.linalg.norm(protos, axis=1)
            if v_norm == 0.0 or np.any(p_norms == 0.0):
                raise NumericError("cosine gradients undefined for zero-norm vectors")
            cos = (protos @ v) / (p_norms * v_norm)
            # dd_i/dv = -(phi_i/(|v||phi_i|) - cos_i v/|v|^2)
            dvs = -(protos / (p_norms[:, None] * v_norm) - np.outer(cos, v) / v_norm**2)
            span_grads[j] = coef @ dvs
            per_proto = -coef[:, None] * (
                v[None, :] / (p_norms[:, None] * v_norm)
                - cos[:, None] * protos / (p_norms**2)[:, None]
            )
        else:
            raise DataError(f"unknown similarity mode '{mode}'")
        for pos, slot in enumerate(row.slots):
            proto_grads[slot] += per_proto[pos]
    return ClassificationGrads(loss=loss / m, span_grads=span_grads, prototype_grads=proto_grads)


def joint_loss(ld: DistanceLossReport, ls: float) -> float:
    total = ld.loss + ls
    if not math.isfinite(total):
        raise NumericError(f"non-finite joint loss (L_d={ld.loss}, L_s={ls})")
    return total


def sample_none_spans(
    sentence: Sentence,
    gold,
    all_spans,
    count: int,
    seed: int,
    epoch: int = 0,
) -> list[Span]:
    """Uniform sample, without replacement, of spans that match no gold
    entity's exact boundaries; deterministic per (sentence id, epoch, seed)."""
    if count < 0:
        raise DataError(f"negative sample count {count}")
    gold_keys = {(e.start, e.end) for e in gold}
    pool = [s for s in all_spans if (s.start, s.end) not in gold_keys]
    if count >= len(pool):
        return pool
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, sentence.id, epoch)))
    picked = rng.choice(len(pool), size=count, replace=False)
    return [pool[i] for i in sorted(picked)]


def remove_overlaps(predictions) -> list[Prediction]:
    """Greedy by ascending distance (best similarity first): accept a
    prediction iff it overlaps no already-accepted one."""
    ranked = sorted(
        predictions,
        key=lambda p: (p.distance, p.span.start, p.span.length, p.slot),
    )
    accepted: list[Prediction] = []
    for pred in ranked:
        if not any(spans_overlap(pred.span, got.span) for got in accepted):
            accepted.append(pred)
    accepted.sort(key=lambda p: (p.span.start, p.span.length))
    return accepted


def write_predictions(results, path) -> None:
    """One JSONL record per sentence: {"id", "entities": [...]}."""
    with open(path, "w", encoding="utf-8") as fh:
        for sentence_id, preds in results:
            record = {
                "id": sentence_id,
                "entities": [
                    {
                        "start": p.span.start,
                        "end": p.span.end,
                        "type": p.type_name,
                        "distance": p.distance,
                    }
                    for p in preds
                ],
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_predictions(path) -> list[tuple[str, list[dict]]]:
    results = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                results.append((str(record["id"]), list(record["entities"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise DataError(f"{path}: line {lineno}: malformed prediction record ({exc})") from None
    return results
