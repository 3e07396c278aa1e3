"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside the pytest verdicts.
"""

import math
import struct
import time
from contextlib import contextmanager

import numpy as np
import pytest

from _synth import (
    DESK_ADAPT_KWARGS,
    DESK_TRAIN_KWARGS,
    HASH_DIM,
    HASH_SEED,
    SOURCE_TYPES,
    TARGET_TYPES,
    generate,
)
from epnet.classifier import (
    Prediction,
    TrainingBatch,
    classification_loss,
    decode,
    remove_overlaps,
    sample_none_spans,
    similarity,
)
from epnet.corpus import Dataset, Entity, Sentence, Span, TypeSystem, enumerate_spans, spans_overlap
from epnet.embeddings import (
    hash_embed,
    max_pool,
    read_embedding_file,
    write_embedding_file,
)
from epnet.errors import CorruptFileError, FileFormatError, VersionMismatchError
from epnet.evaluation import aggregate, score
from epnet.projection import (
    LengthEmbeddingTable,
    ProjectionFFN,
    ffn_backward_batch,
)
from epnet.prototypes import (
    PrototypeBank,
    assign_for_train,
    distance_loss,
    distance_loss_gradient,
    distance_matrix,
    init_random,
    write_distance_csv,
)
from epnet.sampler import greedy_sample, sample_support_suite
from epnet.seeding import derive_seed
from epnet.trainer import (
    AdaptConfig,
    OptimizerState,
    TrainConfig,
    adapt,
    load_checkpoint,
    optimizer_step,
    recognize,
    save_checkpoint,
    train,
)


@contextmanager
def criterion(number, text):
    try:
        yield
    except BaseException:
        print(f"\n[ACCEPTANCE {number}] FAIL - {text}")
        raise
    print(f"\n[ACCEPTANCE {number}] PASS - {text}")


def rel_err(analytic, fd):
    return abs(analytic - fd) / max(1.0, abs(fd))


# --- criterion 1: gradient correctness ---------------------------------------


def _random_fixture(rng, num_slots):
    """Random bank/table/FFN plus a batch, avoiding kinks of relu and |.|."""
    d1, d2, d3, h, eps = 8, 6, 2, 5, 3
    while True:
        bank = PrototypeBank(rng.normal(0.0, 0.6, size=(num_slots, d1)))
        n_types = int(rng.integers(1, min(num_slots - 1, 4) + 1))
        assign_for_train(bank, TypeSystem(tuple(f"T{i}" for i in range(n_types))))
        table = LengthEmbeddingTable(rng.normal(0.0, 0.5, size=(eps, d3)))
        ffn = ProjectionFFN(
            [rng.normal(0.0, 0.5, size=(d2 + d3, h)),
             rng.normal(0.0, 0.5, size=(h, h)),
             rng.normal(0.0, 0.5, size=(h, d1))],
            [rng.normal(0.0, 0.1, size=h),
             rng.normal(0.0, 0.1, size=h),
             rng.normal(0.0, 0.1, size=d1)],
        )
        m = int(rng.integers(1, 9))
        pooled = rng.normal(0.0, 1.0, size=(m, d2))
        lengths = rng.integers(1, eps + 1, size=m)
        slots = bank.assigned_slots()
        gold = [int(slots[rng.integers(len(slots))]) for _ in range(m)]
        tau = float(rng.uniform(0.5, 4.0))
        raw = np.concatenate([pooled, table.rows[lengths - 1]], axis=1)
        _, (_, preacts) = ffn.forward(raw)
        if min(abs(z).min() for z in preacts) < 1e-4:
            continue  # too close to a relu kink for finite differences
        if abs(distance_loss(bank, tau).euc - tau) < 1e-3:
            continue  # too close to the |.| kink
        return bank, table, ffn, pooled, lengths, gold, tau


def _params_of(bank, table, ffn):
    params = {"prototypes": bank.vectors, "length": table.rows}
    for i, (w, b) in enumerate(zip(ffn.weights, ffn.biases)):
        params[f"w{i}"] = w
        params[f"b{i}"] = b
    return params


def _joint_loss_value(params, assignment, history, pooled, lengths, gold, tau, activation="relu"):
    bank = PrototypeBank(params["prototypes"], assignment, history)
    n_layers = sum(1 for k in params if k.startswith("w"))
    ffn = ProjectionFFN(
        [params[f"w{i}"] for i in range(n_layers)],
        [params[f"b{i}"] for i in range(n_layers)],
        activation,
    )
    raw = np.concatenate([pooled, params["length"][lengths - 1]], axis=1)
    projected, _ = ffn.forward(raw)
    rows = [similarity(projected[j], bank) for j in range(len(gold))]
    batch = TrainingBatch(spans=[None] * len(gold), gold_slots=gold)
    ls = classification_loss(batch, rows, bank).loss
    return distance_loss(bank, tau).loss + ls


def test_criterion_1_gradient_correctness():
    with criterion(1, "analytic gradients of L_d, L_s and the joint loss match "
                      "central finite differences (rel err < 1e-4)"):
        started = time.monotonic()
        rng = np.random.Generator(np.random.PCG64(1234))
        slot_choices = [3, 5, 101]
        step = 1e-5
        worst = 0.0
        for config_index in range(50):
            num_slots = slot_choices[config_index % 3]
            bank, table, ffn, pooled, lengths, gold, tau = _random_fixture(rng, num_slots)
            batch = TrainingBatch(spans=[None] * len(gold), gold_slots=gold)
            raw = np.concatenate([pooled, table.rows[lengths - 1]], axis=1)
            projected, cache = ffn.forward(raw)
            rows = [similarity(projected[j], bank) for j in range(len(gold))]
            cls = classification_loss(batch, rows, bank)
            grads = {"prototypes": cls.prototype_grads + distance_loss_gradient(bank, tau)}
            w_grads, b_grads, x_grad = ffn_backward_batch(ffn, raw, cls.span_grads, cache)
            for i in range(3):
                grads[f"w{i}"] = w_grads[i]
                grads[f"b{i}"] = b_grads[i]
            length_grad = np.zeros_like(table.rows)
            np.add.at(length_grad, lengths - 1, x_grad[:, pooled.shape[1]:])
            grads["length"] = length_grad

            params = _params_of(bank, table, ffn)
            args = (bank.assignment, bank.assigned_history, pooled, lengths, gold, tau)
            for name, p in params.items():
                flat = p.reshape(-1)
                gflat = grads[name].reshape(-1)
                for k in range(flat.size):
                    orig = flat[k]
                    flat[k] = orig + step
                    fp = _joint_loss_value(params, *args)
                    flat[k] = orig - step
                    fm = _joint_loss_value(params, *args)
                    flat[k] = orig
                    fd = (fp - fm) / (2 * step)
                    err = rel_err(gflat[k], fd)
                    worst = max(worst, err)
                    assert err < 1e-4, f"config {config_index} {name}[{k}]: {gflat[k]} vs fd {fd}"
        elapsed = time.monotonic() - started
        print(f"\n  50 configurations, worst relative error {worst:.3g}, {elapsed:.1f}s")
        assert elapsed < 30.0


# --- criterion 2: prototype dispersal -----------------------------------------


def test_criterion_2_prototype_dispersal(tmp_path):
    with criterion(2, "dispersal training alone drives |Euc - 2| below 0.05 "
                      "within 5000 steps (101 prototypes, d1=512, lr 5e-5)"):
        started = time.monotonic()
        tau, lr = 2.0, 5e-5
        bank = init_random(512, seed=2024, num_slots=101, scale=0.1)
        params = {"prototypes": bank.vectors}
        state = OptimizerState(params)
        steps = 0
        euc = distance_loss(bank, tau).euc
        while abs(euc - tau) >= 0.05 and steps < 5000:
            grads = {"prototypes": distance_loss_gradient(bank, tau)}
            optimizer_step(params, grads, state, lr=lr, wd=0.0)
            steps += 1
            euc = distance_loss(bank, tau).euc
        elapsed = time.monotonic() - started
        matrix = distance_matrix(bank, list(range(101)))
        off = matrix[np.triu_indices(101, k=1)]
        write_distance_csv(bank, range(101), tmp_path / "prototype_distances.csv")
        print(f"\n  Euc(phi) = {euc:.4f} after {steps} steps ({elapsed:.1f}s)")
        print(f"  pairwise squared distances: mean {off.mean():.4f} "
              f"std {off.std():.4f} min {off.min():.4f} max {off.max():.4f} "
              f"(distribution exported, not asserted)")
        assert abs(euc - tau) < 0.05
        assert steps < 5000
        assert elapsed < 120.0


# --- criterion 3: desk-scale end-to-end ---------------------------------------


def _predictions_for_scoring(results):
    return [
        (sid, [{"start": p.span.start, "end": p.span.end, "type": p.type_name}
               for p in preds])
        for sid, preds in results
    ]


def test_criterion_3_end_to_end():
    with criterion(3, "synthetic 6+6-type transfer reaches mean F1 >= 0.90 over "
                      "5 support sets and EP-Net >= CP-Net on identical runs"):
        started = time.monotonic()
        train_ds = generate(SOURCE_TYPES, 200, seed=101, id_prefix="tr")
        dev_ds = generate(TARGET_TYPES, 120, seed=202, id_prefix="dv")
        query_ds = generate(TARGET_TYPES, 100, seed=303, id_prefix="qr")
        stores = {id(ds): hash_embed(ds, HASH_DIM, HASH_SEED)
                  for ds in (train_ds, dev_ds, query_ds)}

        ep_ckpt = train(train_ds, stores[id(train_ds)], TrainConfig(**DESK_TRAIN_KWARGS))
        cp_ckpt = train(train_ds, stores[id(train_ds)],
                        TrainConfig(**{**DESK_TRAIN_KWARGS, "cpnet": True}))
        supports = sample_support_suite(dev_ds, dev_ds.type_system, k=5, n_sets=5,
                                        base_seed=50)
        ep_f1, cp_f1 = [], []
        for i, support in enumerate(supports):
            support_store = hash_embed(support.dataset, HASH_DIM, HASH_SEED)
            for ckpt, out in ((ep_ckpt, ep_f1), (cp_ckpt, cp_f1)):
                adapted = adapt(ckpt, support.dataset, support_store,
                                AdaptConfig(seed=i, **DESK_ADAPT_KWARGS))
                results = recognize(adapted, query_ds, stores[id(query_ds)])
                out.append(score(_predictions_for_scoring(results), query_ds).f1)
        ep_mean = aggregate(ep_f1).mean
        cp_mean = aggregate(cp_f1).mean
        elapsed = time.monotonic() - started
        print(f"\n  EP-Net F1 per support set: {[round(x, 4) for x in ep_f1]}")
        print(f"  EP-Net mean {ep_mean:.4f} | CP-Net mean {cp_mean:.4f} ({elapsed:.1f}s)")
        assert ep_mean >= 0.90
        assert ep_mean >= cp_mean
        assert elapsed < 300.0


# --- criterion 4: decode oracle ------------------------------------------------


def test_criterion_4_decode_oracle():
    with criterion(4, "decode equals brute-force argmin with smallest-slot "
                      "tie-break on 1000 random rows"):
        rng = np.random.Generator(np.random.PCG64(4))
        names = tuple(f"T{i}" for i in range(6))
        bank = PrototypeBank(rng.normal(size=(7, 3)))
        assign_for_train(bank, TypeSystem(names))
        for _ in range(1000):
            row = similarity(rng.normal(size=3), bank)
            if rng.integers(3) == 0:  # force exact ties
                i, j = rng.choice(len(row.distances), size=2, replace=False)
                row.distances[i] = row.distances[j]
            best_slot, best = None, math.inf
            for pos, slot in enumerate(row.slots):
                if row.distances[pos] < best:
                    best, best_slot = float(row.distances[pos]), slot
            assert decode(row).slot == best_slot


# --- criterion 5: overlap removal ----------------------------------------------


def _greedy_reference(predictions):
    """Independent re-statement of the rule: best similarity first, accept
    unless overlapping an accepted prediction, report by position."""
    pending = list(predictions)
    pending.sort(key=lambda p: (p.distance, p.span.start, p.span.length, p.slot))
    taken = []
    for cand in pending:
        blocked = False
        for kept in taken:
            lo = max(cand.span.start, kept.span.start)
            hi = min(cand.span.start + cand.span.length, kept.span.start + kept.span.length)
            if lo < hi:
                blocked = True
                break
        if not blocked:
            taken.append(cand)
    taken.sort(key=lambda p: (p.span.start, p.span.length))
    return taken


def test_criterion_5_overlap_removal():
    with criterion(5, "overlap removal is pairwise non-overlapping, matches an "
                      "independent greedy reference, and reproduces the chain example"):
        rng = np.random.Generator(np.random.PCG64(5))
        for trial in range(500):
            preds = [
                Prediction(Span("s", int(rng.integers(0, 15)), int(rng.integers(1, 5))),
                           "T", float(rng.uniform(0, 3)), slot=int(rng.integers(1, 6)))
                for _ in range(int(rng.integers(0, 11)))
            ]
            kept = remove_overlaps(preds)
            for i in range(len(kept)):
                for j in range(i + 1, len(kept)):
                    assert not spans_overlap(kept[i].span, kept[j].span)
            reference = _greedy_reference(preds)
            assert [(p.span.start, p.span.length) for p in kept] == \
                   [(p.span.start, p.span.length) for p in reference]
        chain = [
            Prediction(Span("s", 1, 3), "A", 0.5, 1),
            Prediction(Span("s", 2, 3), "B", 0.9, 2),
            Prediction(Span("s", 5, 2), "C", 1.2, 3),
        ]
        kept = remove_overlaps(chain)
        assert [(p.span.start, p.span.end) for p in kept] == [(1, 4), (5, 7)]


# --- criterion 6: greedy sampler -----------------------------------------------


def test_criterion_6_greedy_sampler():
    with criterion(6, "greedy sampling reaches K per type on 100 random corpora, "
                      "reproduces the hand trace, and is seed-deterministic"):
        rng = np.random.Generator(np.random.PCG64(6))
        for trial in range(100):
            k = int(rng.integers(1, 4))
            names = [f"T{i}" for i in range(int(rng.integers(2, 6)))]
            sentences, annotations = [], {}

            def add_sentence(sid, ent_names):
                tokens = tuple(f"w{i}" for i in range(len(ent_names) + 1))
                sentences.append(Sentence(sid, tokens))
                annotations[sid] = [Entity(i, i + 1, n) for i, n in enumerate(ent_names)]

            for si in range(int(rng.integers(0, 12))):
                picks = [str(n) for n in rng.choice(names, size=int(rng.integers(1, 4)))]
                add_sentence(f"s{si}", picks)
            for i, name in enumerate(names):  # K dedicated sentences per type
                for j in range(k):
                    add_sentence(f"g{i}_{j}", [name])
            dev = Dataset(sentences, annotations, TypeSystem(tuple(names)))
            support = greedy_sample(dev, dev.type_system, k=k, seed=trial)
            assert support.complete
            for name in names:
                assert support.counts[name] >= k

        # hand trace: rarest type first, shared sentence satisfies both
        dev = Dataset(
            [Sentence("s1", ("a", "b")), Sentence("s2", ("c",)), Sentence("s3", ("d",))],
            {"s1": [Entity(0, 1, "A"), Entity(1, 2, "B")],
             "s2": [Entity(0, 1, "B")], "s3": [Entity(0, 1, "B")]},
            TypeSystem(("A", "B")),
        )
        support = greedy_sample(dev, dev.type_system, k=1, seed=0)
        assert [s.id for s in support.dataset.sentences] == ["s1"]

        big = generate(TARGET_TYPES, 80, seed=60)
        a = greedy_sample(big, big.type_system, k=3, seed=9)
        b = greedy_sample(big, big.type_system, k=3, seed=9)
        assert [s.id for s in a.dataset.sentences] == [s.id for s in b.dataset.sentences]


# --- criterion 7: span enumeration count ----------------------------------------


def test_criterion_7_span_count_closed_form():
    with criterion(7, "span enumeration matches the closed-form count for "
                      "n <= 50, eps <= 12"):
        for n in range(1, 51):
            sentence = Sentence("s", tuple(f"t{i}" for i in range(n)))
            for eps in range(1, 13):
                expected = (n * eps - eps * (eps - 1) // 2) if n >= eps else n * (n + 1) // 2
                assert len(enumerate_spans(sentence, eps)) == expected


# --- criterion 8: serialization --------------------------------------------------


def test_criterion_8_serialization(tmp_path):
    with criterion(8, "checkpoint and EPNE round trips are value-exact; "
                      "corrupted files raise typed errors"):
        dataset = generate(SOURCE_TYPES, 20, seed=8, id_prefix="ser")
        store = hash_embed(dataset, HASH_DIM, HASH_SEED)
        ckpt = train(dataset, store, TrainConfig(**{**DESK_TRAIN_KWARGS, "epochs": 2}))
        path = tmp_path / "model.ckpt"
        save_checkpoint(ckpt, path)
        loaded = load_checkpoint(path)
        np.testing.assert_array_equal(loaded.bank.vectors, ckpt.bank.vectors)
        np.testing.assert_array_equal(loaded.table.rows, ckpt.table.rows)
        for a, b in zip(loaded.ffn.weights, ckpt.ffn.weights):
            np.testing.assert_array_equal(a, b)
        assert loaded.config == ckpt.config
        resaved = tmp_path / "model2.ckpt"
        save_checkpoint(loaded, resaved)
        assert resaved.read_bytes() == path.read_bytes()

        truncated = tmp_path / "trunc.ckpt"
        truncated.write_bytes(path.read_bytes()[:200])
        with pytest.raises(CorruptFileError):
            load_checkpoint(truncated)

        flipped = bytearray(path.read_bytes())
        (header_len,) = struct.unpack("<I", flipped[:4])
        flipped[4 + header_len + 64] ^= 0x01
        bad = tmp_path / "bad.ckpt"
        bad.write_bytes(bytes(flipped))
        with pytest.raises(CorruptFileError):
            load_checkpoint(bad)

        epne = tmp_path / "e.epne"
        write_embedding_file(store, epne)
        loaded_store = read_embedding_file(epne, dataset)
        for sid, matrix in store.table.items():
            np.testing.assert_array_equal(
                loaded_store.table[sid], matrix.astype(np.float32).astype(np.float64))
        epne2 = tmp_path / "e2.epne"
        write_embedding_file(loaded_store, epne2)
        assert epne2.read_bytes() == epne.read_bytes()
        with pytest.raises(FileFormatError):
            bad_epne = tmp_path / "bad.epne"
            bad_epne.write_bytes(b"NOPE" + epne.read_bytes()[4:])
            read_embedding_file(bad_epne)
        with pytest.raises(VersionMismatchError):
            versioned = tmp_path / "v.epne"
            data = bytearray(epne.read_bytes())
            data[4:8] = struct.pack("<I", 3)
            versioned.write_bytes(bytes(data))
            read_embedding_file(versioned)
        with pytest.raises(CorruptFileError):
            short = tmp_path / "short.epne"
            short.write_bytes(epne.read_bytes()[:-17])
            read_embedding_file(short)


# --- criterion 9: ablation switches ----------------------------------------------


def _manual_ls_only_training(dataset, store, cfg):
    """Re-derivation of the training loop with the classification loss only,
    mirroring the batching and seeding of train()."""
    bank = init_random(cfg.d1, derive_seed(cfg.seed, "prototypes"), cfg.num_slots,
                       cfg.init_scale)
    assign_for_train(bank, dataset.type_system)
    from epnet.projection import init_projection
    table, ffn = init_projection(
        store.dim, cfg.d3, cfg.d1, cfg.hidden, derive_seed(cfg.seed, "projection"),
        epsilon=cfg.epsilon, num_layers=cfg.ffn_layers, activation=cfg.activation)
    params = {"prototypes": bank.vectors, "length": table.rows}
    for i, (w, b) in enumerate(zip(ffn.weights, ffn.biases)):
        params[f"w{i}"] = w
        params[f"b{i}"] = b
    state = OptimizerState(params)
    for epoch in range(cfg.epochs):
        shuffle_rng = np.random.Generator(
            np.random.PCG64(derive_seed(cfg.seed, "shuffle", epoch)))
        order = shuffle_rng.permutation(len(dataset.sentences))
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [dataset.sentences[i] for i in order[lo:lo + cfg.batch_size]]
            instances = []
            for sent in chunk:
                gold = dataset.entities(sent.id)
                for e in gold:
                    if e.length <= cfg.epsilon:
                        instances.append((Span(sent.id, e.start, e.length), e.type_name))
                pool = enumerate_spans(sent, cfg.epsilon)
                for span in sample_none_spans(sent, gold, pool, cfg.none_span_count,
                                              cfg.seed, epoch):
                    instances.append((span, None))
            if not instances:
                continue
            pooled = np.stack([max_pool(store, span).pooled for span, _ in instances])
            lengths = np.array([span.length for span, _ in instances])
            raw = np.concatenate([pooled, table.rows[lengths - 1]], axis=1)
            projected, cache = ffn.forward(raw)
            gold_slots = [0 if t is None else bank.assignment[t] for _, t in instances]
            batch = TrainingBatch(spans=[s for s, _ in instances], gold_slots=gold_slots)
            rows = [similarity(projected[j], bank) for j in range(len(instances))]
            cls = classification_loss(batch, rows, bank)
            grads = {"prototypes": cls.prototype_grads.copy()}
            w_grads, b_grads, x_grad = ffn_backward_batch(ffn, raw, cls.span_grads, cache)
            for i in range(len(ffn.weights)):
                grads[f"w{i}"] = w_grads[i]
                grads[f"b{i}"] = b_grads[i]
            length_grad = np.zeros_like(table.rows)
            np.add.at(length_grad, lengths - 1, x_grad[:, store.dim:])
            grads["length"] = length_grad
            optimizer_step(params, grads, state, cfg.learning_rate, cfg.weight_decay)
    return params


def test_criterion_9_ablation_switches():
    with criterion(9, "--no-distance-loss removes L_d from every optimizer step; "
                      "--cosine decode is invariant to positive span rescaling"):
        dataset = generate(SOURCE_TYPES, 12, seed=9, id_prefix="abl")
        store = hash_embed(dataset, HASH_DIM, HASH_SEED)
        base = {**DESK_TRAIN_KWARGS, "epochs": 3, "use_distance_loss": False}
        ckpt_a = train(dataset, store, TrainConfig(**{**base, "tau": 1.0}))
        ckpt_b = train(dataset, store, TrainConfig(**{**base, "tau": 9.0}))
        # tau only enters through L_d: identical trajectories prove its absence
        np.testing.assert_array_equal(ckpt_a.bank.vectors, ckpt_b.bank.vectors)
        for a, b in zip(ckpt_a.ffn.weights, ckpt_b.ffn.weights):
            np.testing.assert_array_equal(a, b)
        for _, ld, _, _ in ckpt_a.loss_history:
            assert ld == 0.0

        cfg = TrainConfig(**{**base, "tau": 2.0})
        manual = _manual_ls_only_training(dataset, store, cfg)
        ckpt = train(dataset, store, cfg)
        np.testing.assert_array_equal(ckpt.bank.vectors, manual["prototypes"])
        np.testing.assert_array_equal(ckpt.table.rows, manual["length"])
        for i, (w, b) in enumerate(zip(ckpt.ffn.weights, ckpt.ffn.biases)):
            np.testing.assert_array_equal(w, manual[f"w{i}"])
            np.testing.assert_array_equal(b, manual[f"b{i}"])

        rng = np.random.Generator(np.random.PCG64(90))
        bank = PrototypeBank(rng.normal(size=(6, 4)))
        assign_for_train(bank, TypeSystem(("A", "B", "C", "D")))
        for _ in range(200):
            v = rng.normal(size=4)
            scale = float(rng.uniform(1e-3, 100.0))
            assert decode(similarity(v, bank, mode="cosine")).slot == \
                   decode(similarity(scale * v, bank, mode="cosine")).slot
