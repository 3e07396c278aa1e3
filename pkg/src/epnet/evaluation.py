"""Micro precision/recall/F1 over exact-boundary, exact-type entity matches,
with per-type breakdowns and multi-run aggregation."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field

from .corpus import Dataset
from .errors import DataError


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


@dataclass
class TypeScore:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[2]


@dataclass
class ScoreReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_type: dict[str, TypeScore] = field(default_factory=dict)


@dataclass
class AggregateReport:
    f1_scores: list[float]
    mean: float
    std: float  # population convention


def score(predictions, gold: Dataset) -> ScoreReport:
    """Score (sentence_id, entities) prediction pairs against gold.

    A predicted entity is a true positive iff an unmatched gold entity has
    identical (start, end, type); matching is one-to-one per sentence.
    """
    per_type: dict[str, TypeScore] = {}

    def bucket(name: str) -> TypeScore:
        if name not in per_type:
            per_type[name] = TypeScore()
        return per_type[name]

    tp = fp = fn = 0
    seen_ids = set()
    for sentence_id, entities in predictions:
        gold.sentence(sentence_id)  # raises DataError for unknown ids
        seen_ids.add(sentence_id)
        remaining = Counter(
            (e.start, e.end, e.type_name) for e in gold.entities(sentence_id)
        )
        for ent in entities:
            key = (int(ent["start"]), int(ent["end"]), str(ent["type"]))
            if remaining[key] > 0:
                remaining[key] -= 1
                tp += 1
                bucket(key[2]).tp += 1
            else:
                fp += 1
                bucket(key[2]).fp += 1
        for (_, _, name), count in remaining.items():
            fn += count
            bucket(name).fn += count
    for sent in gold.sentences:
        if sent.id not in seen_ids:
            for ent in gold.entities(sent.id):
                fn += 1
                bucket(ent.type_name).fn += 1
    precision, recall, f1 = _prf(tp, fp, fn)
    return ScoreReport(tp=tp, fp=fp, fn=fn, precision=precision, recall=recall,
                       f1=f1, per_type=per_type)


def aggregate(reports) -> AggregateReport:
    """Arithmetic mean and population standard deviation of per-run F1."""
    f1s = [r.f1 if isinstance(r, ScoreReport) else float(r) for r in reports]
    if not f1s:
        raise DataError("cannot aggregate an empty report list")
    mean = sum(f1s) / len(f1s)
    variance = sum((x - mean) ** 2 for x in f1s) / len(f1s)
    return AggregateReport(f1_scores=f1s, mean=mean, std=math.sqrt(variance))


def report_to_dict(report: ScoreReport) -> dict:
    return {
        "tp": report.tp,
        "fp": report.fp,
        "fn": report.fn,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "per_type": {
            name: {"tp": ts.tp, "fp": ts.fp, "fn": ts.fn,
                   "precision": ts.precision, "recall": ts.recall, "f1": ts.f1}
            for name, ts in sorted(report.per_type.items())
        },
    }


def write_report_json(report: ScoreReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_aggregate_csv(agg: AggregateReport, path, run_names=None) -> None:
    if run_names is None:
        run_names = [f"run{i}" for i in range(len(agg.f1_scores))]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "f1", "mean", "std"])
        for name, f1 in zip(run_names, agg.f1_scores):
            writer.writerow([name, repr(f1), "", ""])
        writer.writerow(["all", "", repr(agg.mean), repr(agg.std)])
