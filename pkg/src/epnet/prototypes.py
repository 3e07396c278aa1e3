"""Prototype bank: slot assignment across Train/Adapt, the dispersal loss
with its analytic gradient, averaged (conventional) prototypes, and
distance-matrix export.

The dispersal loss drives the average squared pairwise distance over ALL
slots (assigned or not) toward a threshold tau:

    euc  = sum_ij ||phi_i - phi_j||^2 / S^2      (S = slot count, zero self-pairs included)
    psi  = |euc - tau|
    loss = log(psi + 1)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .corpus import NONE_TYPE, TypeSystem
from .errors import DataError

DEFAULT_NUM_SLOTS = 101
NONE_SLOT = 0


@dataclass
class DistanceLossReport:
    euc: float
    psi: float
    loss: float


class PrototypeBank:
    """Matrix of prototype vectors plus the type-to-slot assignment.

    Slot 0 is permanently the None type; entity types occupy slots >= 1.
    `assigned_history` records entity slots ever assigned during Train, which
    drives slot reuse in Adapt. `inactive_slots` marks zeroed filler slots of
    averaged (conventional-prototype) banks.
    """

    def __init__(
        self,
        vectors: np.ndarray,
        assignment: dict[str, int] | None = None,
        assigned_history: set[int] | None = None,
        inactive_slots: frozenset[int] = frozenset(),
    ):
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.ndim != 2 or vectors.shape[0] < 1:
            raise DataError(f"prototype matrix must be 2-D, got shape {vectors.shape}")
        self.vectors = vectors
        self.assignment = dict(assignment or {})
        self.assigned_history = set(assigned_history or ())
        self.inactive_slots = inactive_slots
        self._validate()

    def _validate(self):
        slots = list(self.assignment.values())
        if len(set(slots)) != len(slots):
            raise DataError("prototype assignment must be injective")
        for name, slot in self.assignment.items():
            if name == NONE_TYPE or slot == NONE_SLOT:
                raise DataError(f"slot 0 is reserved for the None type (got {name} -> {slot})")
            if not 0 < slot < self.num_slots:
                raise DataError(f"slot {slot} for type '{name}' out of range")

    @property
    def num_slots(self) -> int:
        return self.vectors.shape[0]

    @property
    def d1(self) -> int:
        return self.vectors.shape[1]

    def assigned_slots(self) -> list[int]:
        """Slot 0 plus the assigned entity slots, ascending."""
        return [NONE_SLOT] + sorted(self.assignment.values())

    def type_of_slot(self, slot: int) -> str:
        if slot == NONE_SLOT:
            return NONE_TYPE
        for name, s in self.assignment.items():
            if s == slot:
                return name
        raise DataError(f"slot {slot} is not assigned")

    def copy(self) -> "PrototypeBank":
        return PrototypeBank(
            self.vectors.copy(),
            dict(self.assignment),
            set(self.assigned_history),
            self.inactive_slots,
        )


def init_random(d1: int, seed: int, num_slots: int = DEFAULT_NUM_SLOTS, scale: float = 0.1) -> PrototypeBank:
    """Gaussian-initialized bank; only the None slot is assigned."""
    if d1 < 1:
        raise DataError(f"prototype dimension must be >= 1, got {d1}")
    rng = np.random.Generator(np.random.PCG64(seed))
    vectors = rng.normal(0.0, scale, size=(num_slots, d1))
    return PrototypeBank(vectors)


def distance_loss(bank: PrototypeBank, tau: float) -> DistanceLossReport:
    if not tau > 0:
        raise DataError(f"distance threshold must be positive, got {tau}")
    s = bank.num_slots
    col_sum = bank.vectors.sum(axis=0)
    sq_sum = float((bank.vectors ** 2).sum())
    euc = (2.0 * s * sq_sum - 2.0 * float(col_sum @ col_sum)) / (s * s)
    psi = abs(euc - tau)
    return DistanceLossReport(euc=euc, psi=psi, loss=math.log(psi + 1.0))


def distance_loss_gradient(bank: PrototypeBank, tau: float) -> np.ndarray:
    """d loss / d vectors; the zero matrix at the non-differentiable psi = 0."""
    report = distance_loss(bank, tau)
    if report.psi == 0.0:
        return np.zeros_like(bank.vectors)
    s = bank.num_slots
    col_sum = bank.vectors.sum(axis=0)
    grad_euc = 4.0 * (s * bank.vectors - col_sum[None, :]) / (s * s)
    sign = 1.0 if report.euc > tau else -1.0
    return sign / (report.psi + 1.0) * grad_euc


def assign_for_train(bank: PrototypeBank, types: TypeSystem) -> PrototypeBank:
    """Assign type i (1-based in the type-system order) to slot i."""
    if len(types) > bank.num_slots - 1:
        raise DataError(
            f"{len(types)} entity types exceed the bank capacity of {bank.num_slots - 1}"
        )
    bank.assignment = {name: i + 1 for i, name in enumerate(types)}
    bank.assigned_history.update(bank.assignment.values())
    bank._validate()
    return bank


def assign_for_adapt(
    bank: PrototypeBank,
    target_types: TypeSystem,
    source_assignment: dict[str, int] | None = None,
) -> PrototypeBank:
    """Re-assign slots for a target domain.

    Overlapping type names keep their Train slots; remaining target types
    draw first from ever-assigned-now-free slots, then from never-assigned
    slots, both ascending.
    """
    source = dict(bank.assignment if source_assignment is None else source_assignment)
    kept = {name: source[name] for name in target_types if name in source}
    used = set(kept.values())
    ever_free = [s for s in sorted(bank.assigned_history) if s not in used]
    never = [
        s for s in range(1, bank.num_slots)
        if s not in bank.assigned_history and s not in used
    ]
    pool = ever_free + never
    remaining = [name for name in target_types if name not in kept]
    if len(remaining) > len(pool):
        raise DataError(
            f"{len(remaining)} new target types but only {len(pool)} free prototype slots"
        )
    assignment = dict(kept)
    for name, slot in zip(remaining, pool):
        assignment[name] = slot
    bank.assignment = assignment
    bank._validate()
    return bank


def average_prototypes(
    reps: dict[str, list[np.ndarray]],
    none_reps: list[np.ndarray],
    num_slots: int = DEFAULT_NUM_SLOTS,
) -> PrototypeBank:
    """Conventional prototypes: per-type arithmetic means of example vectors,
    with the None slot averaged over sampled None-span vectors. Unassigned
    slots are zeroed and flagged inactive."""
    if not none_reps:
        raise DataError("no vectors supplied for the None prototype")
    names = sorted(reps)
    if len(names) > num_slots - 1:
        raise DataError(f"{len(names)} types exceed the bank capacity of {num_slots - 1}")
    d1 = np.asarray(none_reps[0]).shape[0]
    vectors = np.zeros((num_slots, d1), dtype=np.float64)
    vectors[NONE_SLOT] = np.mean(np.asarray(none_reps, dtype=np.float64), axis=0)
    assignment = {}
    for i, name in enumerate(names):
        if not reps[name]:
            raise DataError(f"type '{name}' has no example vectors to average")
        stacked = np.asarray(reps[name], dtype=np.float64)
        if stacked.shape[1] != d1:
            raise DataError(f"type '{name}' vectors have dimension {stacked.shape[1]}, expected {d1}")
        slot = i + 1
        vectors[slot] = stacked.mean(axis=0)
        assignment[name] = slot
    inactive = frozenset(range(len(names) + 1, num_slots))
    return PrototypeBank(vectors, assignment, inactive_slots=inactive)


def distance_matrix(bank: PrototypeBank, slots) -> np.ndarray:
    """Squared Euclidean distances between the given slots; symmetric, zero diagonal."""
    slots = list(slots)
    if not slots:
        raise DataError("distance_matrix needs at least one slot")
    for s in slots:
        if not 0 <= s < bank.num_slots:
            raise DataError(f"unknown prototype slot {s}")
    k = len(slots)
    out = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        for j in range(i + 1, k):
            diff = bank.vectors[slots[i]] - bank.vectors[slots[j]]
            d = float(diff @ diff)
            out[i, j] = d
            out[j, i] = d
    return out


def slot_label(bank: PrototypeBank, slot: int) -> str:
    if slot == NONE_SLOT:
        return NONE_TYPE
    for name, s in bank.assignment.items():
        if s == slot:
            return name
    return f"slot{slot}"


def write_distance_csv(bank: PrototypeBank, slots, path) -> None:
    """Header row of slot labels, then numeric rows (heatmap-ready)."""
    slots = list(slots)
    matrix = distance_matrix(bank, slots)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + [slot_label(bank, s) for s in slots])
        for i, s in enumerate(slots):
            writer.writerow([slot_label(bank, s)] + [repr(x) for x in matrix[i]])
