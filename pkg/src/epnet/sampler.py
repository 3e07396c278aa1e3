"""Support-set construction via greedy sampling and simplified N-way K-shot
episode generation.

The greedy sampler satisfies entity types in ascending frequency order,
drawing whole sentences without replacement; every targeted type present in
a drawn sentence advances its count, so counts can overshoot K.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .corpus import Dataset, TypeSystem, save_jsonl
from .errors import DataError
from .seeding import derive_seed


@dataclass
class SupportSet:
    dataset: Dataset
    counts: dict[str, int]
    k: int
    seed: int
    complete: bool  # False when the pool ran out before every type reached K


@dataclass
class Episode:
    way: TypeSystem
    support: SupportSet
    query: Dataset


def _filtered_subset(source: Dataset, sentence_ids, types: TypeSystem) -> Dataset:
    """A dataset of the given sentences with annotations restricted to the
    targeted types (other gold types are treated as None)."""
    sentences = [source.sentence(sid) for sid in sentence_ids]
    annotations = {}
    for sid in sentence_ids:
        kept = [e for e in source.entities(sid) if e.type_name in types]
        if kept:
            annotations[sid] = kept
    return Dataset(sentences, annotations, types)


def greedy_sample(dev: Dataset, types: TypeSystem, k: int, seed: int) -> SupportSet:
    """Draw sentences until every targeted type has at least K entities.

    Types are processed in increasing dev-frequency order (ties broken
    lexicographically); each draw is seeded-uniform over the unchosen
    sentences containing the current type.
    """
    if k < 1:
        raise DataError(f"k must be >= 1, got {k}")
    freq = {name: 0 for name in types}
    containing: dict[str, list[str]] = {name: [] for name in types}
    for sent in dev.sentences:
        present = set()
        for ent in dev.entities(sent.id):
            if ent.type_name in freq:
                freq[ent.type_name] += 1
                present.add(ent.type_name)
        for name in present:
            containing[name].append(sent.id)
    for name in types:
        if freq[name] == 0:
            raise DataError(f"targeted type '{name}' does not occur in the dev set")

    order = sorted(types, key=lambda name: (freq[name], name))
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "greedy")))
    chosen: list[str] = []
    chosen_set: set[str] = set()
    counts = {name: 0 for name in types}
    complete = True
    for name in order:
        while counts[name] < k:
            candidates = [sid for sid in containing[name] if sid not in chosen_set]
            if not candidates:
                complete = False
                break
            sid = candidates[int(rng.integers(len(candidates)))]
            chosen.append(sid)
            chosen_set.add(sid)
            for ent in dev.entities(sid):
                if ent.type_name in counts:
                    counts[ent.type_name] += 1
    return SupportSet(
        dataset=_filtered_subset(dev, chosen, types),
        counts=counts,
        k=k,
        seed=seed,
        complete=complete,
    )


def sample_support_suite(
    dev: Dataset, types: TypeSystem, k: int, n_sets: int, base_seed: int
) -> list[SupportSet]:
    if n_sets < 1:
        raise DataError(f"n_sets must be >= 1, got {n_sets}")
    return [greedy_sample(dev, types, k, base_seed + i) for i in range(n_sets)]


def make_episodes(
    data: Dataset, n_way: int, k_shot: int, n_episodes: int, seed: int
) -> list[Episode]:
    """Simplified episodes: N uniformly drawn types, a greedy-sampled K-shot
    support over them, and a query of all remaining sentences containing
    those types."""
    names = list(data.type_system)
    if n_way < 1 or n_way > len(names):
        raise DataError(f"cannot draw {n_way} types from {len(names)} available")
    rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "episodes")))
    episodes = []
    for index in range(n_episodes):
        picked = rng.choice(len(names), size=n_way, replace=False)
        way = TypeSystem.from_names(sorted(names[i] for i in picked))
        support = greedy_sample(data, way, k_shot, derive_seed(seed, "episode", index))
        support_ids = {sent.id for sent in support.dataset.sentences}
        query_ids = [
            sent.id
            for sent in data.sentences
            if sent.id not in support_ids
            and any(e.type_name in way for e in data.entities(sent.id))
        ]
        if not query_ids:
            raise DataError(f"episode {index}: no query sentences left for types {way.names}")
        episodes.append(Episode(
            way=way,
            support=support,
            query=_filtered_subset(data, query_ids, way),
        ))
    return episodes


def support_manifest(support: SupportSet) -> dict:
    return {
        "types": list(support.dataset.type_system),
        "k": support.k,
        "seed": support.seed,
        "counts": support.counts,
        "complete": support.complete,
        "sentences": len(support.dataset),
    }


def write_support_set(support: SupportSet, jsonl_path, manifest_path) -> None:
    save_jsonl(support.dataset, jsonl_path)
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(support_manifest(support), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_episode(episode: Episode, support_path, query_path, manifest_path) -> None:
    save_jsonl(episode.support.dataset, support_path)
    save_jsonl(episode.query, query_path)
    manifest = {
        "way": list(episode.way),
        "support": support_manifest(episode.support),
        "query_sentences": len(episode.query),
    }
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
