"""Train, Adapt and Recognize phases: batching, the adaptive-moment
optimizer with decoupled weight decay, freezing policy, early stopping,
and checkpoint serialization."""

from __future__ import annotations

import csv
import json
import math
import os
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .classifier import (
    COSINE,
    EUCLIDEAN,
    TrainingBatch,
    classification_loss,
    decode,
    joint_loss,
    remove_overlaps,
    sample_none_spans,
    similarity,
)
from .corpus import NONE_TYPE, Dataset, Span, enumerate_spans
from .embeddings import EmbeddingStore, max_pool
from .errors import CorruptFileError, DataError, NumericError, VersionMismatchError
from .projection import LengthEmbeddingTable, ProjectionFFN, ffn_backward_batch, init_projection
from .prototypes import (
    DEFAULT_NUM_SLOTS,
    NONE_SLOT,
    PrototypeBank,
    assign_for_adapt,
    assign_for_train,
    average_prototypes,
    distance_loss,
    distance_loss_gradient,
    init_random,
)
from .seeding import derive_seed

CHECKPOINT_VERSION = 1
PHASE_TRAINED = "trained"
PHASE_ADAPTED = "adapted"


@dataclass
class TrainConfig:
    epochs: int
    tau: float = 2.0
    epsilon: int = 10
    batch_size: int = 2
    none_span_count: int = 20
    learning_rate: float = 5e-5
    weight_decay: float = 0.01
    seed: int = 0
    d1: int = 512
    d3: int = 25
    hidden: int = 512
    num_slots: int = DEFAULT_NUM_SLOTS
    ffn_layers: int = 3
    activation: str = "relu"
    init_scale: float = 0.1
    use_distance_loss: bool = True
    similarity: str = EUCLIDEAN
    cpnet: bool = False

    def __post_init__(self):
        if self.epochs < 0:
            raise DataError(f"epochs must be >= 0, got {self.epochs}")
        for name in ("tau", "epsilon", "batch_size", "learning_rate", "d1", "d3", "hidden"):
            if not getattr(self, name) > 0:
                raise DataError(f"{name} must be positive")
        if not math.isfinite(self.tau):
            raise DataError("tau must be finite")
        if self.none_span_count < 0 or self.weight_decay < 0:
            raise DataError("none_span_count and weight_decay must be >= 0")
        if self.similarity not in (EUCLIDEAN, COSINE):
            raise DataError(f"unknown similarity mode '{self.similarity}'")


@dataclass
class AdaptConfig:
    max_steps: int = 200
    patience: int = 3
    learning_rate: float = 5e-5
    weight_decay: float = 0.01
    seed: int = 0
    use_distance_loss: bool | None = None  # None inherits the train-time setting

    def __post_init__(self):
        if self.max_steps < 1:
            raise DataError(f"max_steps must be >= 1, got {self.max_steps}")
        if self.patience < 1:
            raise DataError(f"patience must be >= 1, got {self.patience}")


class OptimizerState:
    """First/second moment accumulators for adaptive-moment updates."""

    def __init__(self, params: dict[str, np.ndarray] | None = None,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        if params:
            for name, p in params.items():
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)


def optimizer_step(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
    lr: float,
    wd: float,
) -> None:
    """One bias-corrected adaptive-moment update, in place.

    Decoupled weight decay multiplies parameters by (1 - lr*wd) before the
    moment-based subtraction; the step counter increments once per call.
    """
    t = state.step + 1
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise DataError(f"gradient shape {g.shape} does not match parameter '{name}' {p.shape}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter '{name}'")
        if wd != 0.0:
            p *= 1.0 - lr * wd
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        m_hat = m / (1.0 - state.beta1 ** t)
        v_hat = v / (1.0 - state.beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + state.eps)
    state.step = t


@dataclass
class Checkpoint:
    bank: PrototypeBank
    table: LengthEmbeddingTable
    ffn: ProjectionFFN
    d2: int
    epsilon: int
    phase: str
    config: dict
    optimizer: OptimizerState | None = None
    version: int = CHECKPOINT_VERSION
    loss_history: list = field(default_factory=list, repr=False, compare=False)

    def copy(self) -> "Checkpoint":
        opt = None
        if self.optimizer is not None:
            opt = OptimizerState(beta1=self.optimizer.beta1, beta2=self.optimizer.beta2,
                                 eps=self.optimizer.eps)
            opt.step = self.optimizer.step
            opt.m = {k: v.copy() for k, v in self.optimizer.m.items()}
            opt.v = {k: v.copy() for k, v in self.optimizer.v.items()}
        return Checkpoint(
            bank=self.bank.copy(),
            table=LengthEmbeddingTable(self.table.rows.copy()),
            ffn=self.ffn.copy(),
            d2=self.d2,
            epsilon=self.epsilon,
            phase=self.phase,
            config=json.loads(json.dumps(self.config)),
            optimizer=opt,
            version=self.version,
        )


def _trainable_params(ckpt: Checkpoint, include_length: bool = True) -> dict[str, np.ndarray]:
    params = {"prototypes": ckpt.bank.vectors}
    if include_length:
        params["length"] = ckpt.table.rows
    for i, (w, b) in enumerate(zip(ckpt.ffn.weights, ckpt.ffn.biases)):
        params[f"w{i}"] = w
        params[f"b{i}"] = b
    return params


def _check_store(dataset: Dataset, store: EmbeddingStore) -> None:
    for sent in dataset.sentences:
        if sent.id not in store:
            raise DataError(f"no embeddings for sentence id '{sent.id}'")
        rows = store.matrix(sent.id).shape[0]
        if rows != len(sent):
            raise DataError(f"sentence '{sent.id}': {rows} embedding rows for {len(sent)} tokens")


def _sentence_instances(dataset, sent, epsilon, none_count, seed, epoch):
    """Gold entities (that fit the span threshold) plus sampled None spans,
    as (span, type name or None) pairs."""
    gold = dataset.entities(sent.id)
    instances = [
        (Span(sent.id, e.start, e.length), e.type_name) for e in gold if e.length <= epsilon
    ]
    pool = enumerate_spans(sent, epsilon)
    for span in sample_none_spans(sent, gold, pool, none_count, seed, epoch):
        instances.append((span, None))
    return instances


def _forward_instances(instances, store, table, ffn):
    pooled = np.stack([max_pool(store, span).pooled for span, _ in instances])
    lengths = np.array([span.length for span, _ in instances])
    for length in lengths:
        if length > table.max_length:
            raise DataError(f"span length {length} exceeds the length-embedding table size")
    raw = np.concatenate([pooled, table.rows[lengths - 1]], axis=1)
    projected, cache = ffn.forward(raw)
    return raw, lengths, projected, cache


def _step_grads(ckpt_like, raw, lengths, cache, cls_grads, d2, use_ld, tau, include_length=True):
    table, ffn, bank = ckpt_like
    grads = {"prototypes": cls_grads.prototype_grads.copy()}
    if use_ld:
        grads["prototypes"] += distance_loss_gradient(bank, tau)
    w_grads, b_grads, x_grad = ffn_backward_batch(ffn, raw, cls_grads.span_grads, cache)
    for i in range(len(ffn.weights)):
        grads[f"w{i}"] = w_grads[i]
        grads[f"b{i}"] = b_grads[i]
    if include_length:
        length_grad = np.zeros_like(table.rows)
        np.add.at(length_grad, lengths - 1, x_grad[:, d2:])
        grads["length"] = length_grad
    return grads


def train(dataset: Dataset, store: EmbeddingStore, cfg: TrainConfig) -> Checkpoint:
    """Source-domain training; returns a checkpoint tagged "trained"."""
    if len(dataset.type_system) > cfg.num_slots - 1:
        raise DataError(
            f"{len(dataset.type_system)} entity types exceed the {cfg.num_slots - 1} prototype slots"
        )
    _check_store(dataset, store)

    bank = init_random(cfg.d1, derive_seed(cfg.seed, "prototypes"), cfg.num_slots, cfg.init_scale)
    assign_for_train(bank, dataset.type_system)
    table, ffn = init_projection(
        store.dim, cfg.d3, cfg.d1, cfg.hidden, derive_seed(cfg.seed, "projection"),
        epsilon=cfg.epsilon, num_layers=cfg.ffn_layers, activation=cfg.activation,
    )
    ckpt = Checkpoint(
        bank=bank, table=table, ffn=ffn, d2=store.dim, epsilon=cfg.epsilon,
        phase=PHASE_TRAINED, config=asdict(cfg),
    )
    if cfg.cpnet:
        return _train_cpnet(dataset, store, cfg, ckpt)

    params = _trainable_params(ckpt)
    state = OptimizerState(params)
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, "shuffle", epoch)))
        order = rng.permutation(len(dataset.sentences))
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [dataset.sentences[i] for i in order[lo:lo + cfg.batch_size]]
            instances = []
            for sent in chunk:
                instances.extend(_sentence_instances(
                    dataset, sent, cfg.epsilon, cfg.none_span_count, cfg.seed, epoch))
            if not instances:
                continue
            raw, lengths, projected, cache = _forward_instances(instances, store, table, ffn)
            gold_slots = [NONE_SLOT if t is None else bank.assignment[t] for _, t in instances]
            batch = TrainingBatch(spans=[s for s, _ in instances], gold_slots=gold_slots)
            rows = [
                similarity(projected[j], bank, span=instances[j][0], mode=cfg.similarity)
                for j in range(len(instances))
            ]
            cls = classification_loss(batch, rows, bank, mode=cfg.similarity)
            if cfg.use_distance_loss:
                ld = distance_loss(bank, cfg.tau)
                total = joint_loss(ld, cls.loss)
                ld_val = ld.loss
            else:
                ld_val = 0.0
                total = cls.loss
                if not math.isfinite(total):
                    raise NumericError(f"non-finite training loss {total}")
            grads = _step_grads((table, ffn, bank), raw, lengths, cache, cls,
                                store.dim, cfg.use_distance_loss, cfg.tau)
            optimizer_step(params, grads, state, cfg.learning_rate, cfg.weight_decay)
            history.append((step, ld_val, cls.loss, total))
            step += 1
    ckpt.optimizer = state
    ckpt.loss_history = history
    return ckpt


def _collect_reps(dataset, store, table, ffn, epsilon, none_count, seed, epoch):
    """Projected representations of gold spans grouped by type, plus sampled
    None-span representations, for prototype averaging."""
    reps: dict[str, list[np.ndarray]] = {}
    none_reps: list[np.ndarray] = []
    for sent in dataset.sentences:
        instances = _sentence_instances(dataset, sent, epsilon, none_count, seed, epoch)
        if not instances:
            continue
        _, _, projected, _ = _forward_instances(instances, store, table, ffn)
        for j, (_, type_name) in enumerate(instances):
            if type_name is None:
                none_reps.append(projected[j])
            else:
                reps.setdefault(type_name, []).append(projected[j])
    return reps, none_reps


def _train_cpnet(dataset, store, cfg, ckpt) -> Checkpoint:
    """Conventional-prototype training: classification targets are per-batch
    averaged prototypes (no dispersal loss, no prototype parameters); the
    loss gradient flows through the averaging back into the projection, the
    standard prototypical-network formulation."""
    table, ffn = ckpt.table, ckpt.ffn
    params = _trainable_params(ckpt)
    del params["prototypes"]
    state = OptimizerState(params)
    history = []
    step = 0
    for epoch in range(cfg.epochs):
        rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, "shuffle", epoch)))
        order = rng.permutation(len(dataset.sentences))
        for lo in range(0, len(order), cfg.batch_size):
            chunk = [dataset.sentences[i] for i in order[lo:lo + cfg.batch_size]]
            instances = []
            for sent in chunk:
                instances.extend(_sentence_instances(
                    dataset, sent, cfg.epsilon, cfg.none_span_count, cfg.seed, epoch))
            if not instances:
                continue
            raw, lengths, projected, cache = _forward_instances(instances, store, table, ffn)
            reps: dict[str, list[np.ndarray]] = {}
            none_reps = []
            for j, (_, type_name) in enumerate(instances):
                if type_name is None:
                    none_reps.append(projected[j])
                else:
                    reps.setdefault(type_name, []).append(projected[j])
            if not none_reps:
                continue
            batch_bank = average_prototypes(reps, none_reps, num_slots=cfg.num_slots)
            gold_slots = [
                NONE_SLOT if t is None else batch_bank.assignment[t] for _, t in instances
            ]
            batch = TrainingBatch(spans=[s for s, _ in instances], gold_slots=gold_slots)
            rows = [
                similarity(projected[j], batch_bank, span=instances[j][0], mode=cfg.similarity)
                for j in range(len(instances))
            ]
            cls = classification_loss(batch, rows, batch_bank, mode=cfg.similarity)
            # each prototype is the mean of its members' projections, so its
            # gradient spreads evenly back onto those projections
            members: dict[int, list[int]] = {}
            for j, slot in enumerate(gold_slots):
                members.setdefault(slot, []).append(j)
            for slot, idxs in members.items():
                share = cls.prototype_grads[slot] / len(idxs)
                for j in idxs:
                    cls.span_grads[j] += share
            grads = _step_grads((table, ffn, batch_bank), raw, lengths, cache, cls,
                                store.dim, False, cfg.tau)
            del grads["prototypes"]
            optimizer_step(params, grads, state, cfg.learning_rate, cfg.weight_decay)
            history.append((step, 0.0, cls.loss, cls.loss))
            step += 1
    reps, none_reps = _collect_reps(
        dataset, store, table, ffn, cfg.epsilon, cfg.none_span_count, cfg.seed, cfg.epochs)
    if none_reps:
        ckpt.bank = average_prototypes(reps, none_reps, num_slots=cfg.num_slots)
    ckpt.optimizer = state
    ckpt.loss_history = history
    return ckpt


def adapt(ckpt: Checkpoint, support: Dataset, store: EmbeddingStore, cfg: AdaptConfig) -> Checkpoint:
    """Target-domain fine-tuning on a support set; returns an "adapted"
    checkpoint. Length embeddings and token embeddings stay frozen; with the
    distance loss on, unassigned prototype slots still move under it."""
    if ckpt.phase != PHASE_TRAINED:
        raise DataError(f"adapt expects a 'trained' checkpoint, got '{ckpt.phase}'")
    if not support.sentences:
        raise DataError("empty support set")
    _check_store(support, store)
    if store.dim != ckpt.d2:
        raise DataError(f"embedding dimension {store.dim} does not match checkpoint d2 {ckpt.d2}")

    train_cfg = ckpt.config
    mode = train_cfg.get("similarity", EUCLIDEAN)
    tau = float(train_cfg.get("tau", 2.0))
    none_count = int(train_cfg.get("none_span_count", 20))
    use_ld = train_cfg.get("use_distance_loss", True)
    if cfg.use_distance_loss is not None:
        use_ld = cfg.use_distance_loss

    new = ckpt.copy()
    new.config = {**train_cfg, "adapt": asdict(cfg)}

    if train_cfg.get("cpnet"):
        reps, none_reps = _collect_reps(
            support, store, new.table, new.ffn, new.epsilon, none_count, cfg.seed, 0)
        if not none_reps:
            raise DataError("support set yields no None spans to average")
        for name in support.type_system:
            if name not in reps:
                raise DataError(f"support set has no representable entity of type '{name}'")
        new.bank = average_prototypes(reps, none_reps, num_slots=new.bank.num_slots)
        new.phase = PHASE_ADAPTED
        new.optimizer = None
        new.loss_history = []
        return new

    assign_for_adapt(new.bank, support.type_system)
    params = _trainable_params(new, include_length=False)
    state = OptimizerState(params)
    history = []
    best = math.inf
    bad = 0
    for step_i in range(cfg.max_steps):
        instances = []
        for sent in support.sentences:
            instances.extend(_sentence_instances(
                support, sent, new.epsilon, none_count, cfg.seed, step_i))
        if not instances:
            raise DataError("support set yields no training instances")
        raw, lengths, projected, cache = _forward_instances(instances, store, new.table, new.ffn)
        gold_slots = [
            NONE_SLOT if t is None else new.bank.assignment[t] for _, t in instances
        ]
        batch = TrainingBatch(spans=[s for s, _ in instances], gold_slots=gold_slots)
        rows = [
            similarity(projected[j], new.bank, span=instances[j][0], mode=mode)
            for j in range(len(instances))
        ]
        cls = classification_loss(batch, rows, new.bank, mode=mode)
        if use_ld:
            ld = distance_loss(new.bank, tau)
            total = joint_loss(ld, cls.loss)
            ld_val = ld.loss
        else:
            ld_val = 0.0
            total = cls.loss
        if total < best:
            best = total
            bad = 0
        else:
            bad += 1
            if bad >= cfg.patience:
                break
        grads = _step_grads((new.table, new.ffn, new.bank), raw, lengths, cache, cls,
                            store.dim, use_ld, tau, include_length=False)
        optimizer_step(params, grads, state, cfg.learning_rate, cfg.weight_decay)
        history.append((step_i, ld_val, cls.loss, total))
    new.phase = PHASE_ADAPTED
    new.optimizer = state
    new.loss_history = history
    return new


def recognize(ckpt: Checkpoint, query: Dataset, store: EmbeddingStore):
    """Decode every span of every query sentence, drop None predictions, and
    remove overlaps; returns [(sentence_id, [Prediction, ...]), ...]."""
    if ckpt.phase not in (PHASE_TRAINED, PHASE_ADAPTED):
        raise DataError(f"unknown checkpoint phase '{ckpt.phase}'")
    _check_store(query, store)
    if store.dim != ckpt.d2:
        raise DataError(f"embedding dimension {store.dim} does not match checkpoint d2 {ckpt.d2}")
    mode = ckpt.config.get("similarity", EUCLIDEAN)

    def one(sent):
        spans = enumerate_spans(sent, ckpt.epsilon)
        instances = [(span, None) for span in spans]
        _, _, projected, _ = _forward_instances(instances, store, ckpt.table, ckpt.ffn)
        preds = []
        for j, span in enumerate(spans):
            row = similarity(projected[j], ckpt.bank, span=span, mode=mode)
            pred = decode(row)
            if pred.type_name != NONE_TYPE:
                preds.append(pred)
        return sent.id, remove_overlaps(preds)

    threads = int(os.environ.get("EPNET_THREADS", "0") or 0)
    if threads > 0:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, query.sentences))
    return [one(sent) for sent in query.sentences]


def write_loss_history(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "ld", "ls", "total"])
        for step, ld, ls, total in history:
            writer.writerow([step, repr(ld), repr(ls), repr(total)])


# --- checkpoint file format -------------------------------------------------
#
# u32 header length | UTF-8 JSON header | float64 LE parameter sections |
# u32 CRC32 of the payload. The header records dimensions, assignment,
# config echo, and per-section offsets/shapes.


def _section_arrays(ckpt: Checkpoint) -> dict[str, np.ndarray]:
    arrays = dict(_trainable_params(ckpt))
    if ckpt.optimizer is not None:
        for name, arr in ckpt.optimizer.m.items():
            arrays[f"m:{name}"] = arr
        for name, arr in ckpt.optimizer.v.items():
            arrays[f"v:{name}"] = arr
    return arrays


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    arrays = _section_arrays(ckpt)
    sections = {}
    chunks = []
    offset = 0
    for name in sorted(arrays):
        data = np.ascontiguousarray(arrays[name], dtype="<f8").tobytes()
        sections[name] = {"offset": offset, "shape": list(arrays[name].shape)}
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    header = {
        "format_version": ckpt.version,
        "phase": ckpt.phase,
        "dims": {
            "d1": ckpt.bank.d1,
            "d2": ckpt.d2,
            "d3": ckpt.table.dim,
            "epsilon": ckpt.epsilon,
            "num_slots": ckpt.bank.num_slots,
            "ffn_layers": len(ckpt.ffn.weights),
        },
        "activation": ckpt.ffn.activation,
        "assignment": ckpt.bank.assignment,
        "assigned_history": sorted(ckpt.bank.assigned_history),
        "inactive_slots": sorted(ckpt.bank.inactive_slots),
        "config": ckpt.config,
        "optimizer": None if ckpt.optimizer is None else {
            "step": ckpt.optimizer.step,
            "beta1": ckpt.optimizer.beta1,
            "beta2": ckpt.optimizer.beta2,
            "eps": ckpt.optimizer.eps,
        },
        "sections": sections,
        "payload_size": len(payload),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        fh.write(payload)
        fh.write(struct.pack("<I", zlib.crc32(payload)))


def load_checkpoint(path) -> Checkpoint:
    data = open(path, "rb").read()
    if len(data) < 4:
        raise CorruptFileError(f"{path}: too short to be a checkpoint")
    (header_len,) = struct.unpack("<I", data[:4])
    if 4 + header_len > len(data):
        raise CorruptFileError(f"{path}: truncated header")
    try:
        header = json.loads(data[4:4 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptFileError(f"{path}: unreadable checkpoint header") from None
    version = header.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {CHECKPOINT_VERSION}")
    payload_size = header["payload_size"]
    body = data[4 + header_len:]
    if len(body) != payload_size + 4:
        raise CorruptFileError(f"{path}: payload size mismatch (truncated or padded)")
    payload, (crc,) = body[:payload_size], struct.unpack("<I", body[payload_size:])
    if zlib.crc32(payload) != crc:
        raise CorruptFileError(f"{path}: payload checksum mismatch")

    def section(name: str) -> np.ndarray:
        meta = header["sections"][name]
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = meta["offset"]
        arr = np.frombuffer(payload, dtype="<f8", count=count, offset=start)
        return arr.reshape(shape).astype(np.float64)

    dims = header["dims"]
    bank = PrototypeBank(
        section("prototypes"),
        {str(k): int(v) for k, v in header["assignment"].items()},
        set(header["assigned_history"]),
        frozenset(header["inactive_slots"]),
    )
    table = LengthEmbeddingTable(section("length"))
    n_layers = dims["ffn_layers"]
    ffn = ProjectionFFN(
        [section(f"w{i}") for i in range(n_layers)],
        [section(f"b{i}") for i in range(n_layers)],
        header["activation"],
    )
    optimizer = None
    if header["optimizer"] is not None:
        meta = header["optimizer"]
        optimizer = OptimizerState(beta1=meta["beta1"], beta2=meta["beta2"], eps=meta["eps"])
        optimizer.step = meta["step"]
        for name in header["sections"]:
            if name.startswith("m:"):
                optimizer.m[name[2:]] = section(name)
            elif name.startswith("v:"):
                optimizer.v[name[2:]] = section(name)
    return Checkpoint(
        bank=bank,
        table=table,
        ffn=ffn,
        d2=dims["d2"],
        epsilon=dims["epsilon"],
        phase=header["phase"],
        config=header["config"],
        optimizer=optimizer,
        version=version,
    )
