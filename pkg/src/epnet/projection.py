"""Span-representation head: length embeddings, concatenation, and the
multi-layer feed-forward projection into the prototype space, with manual
forward/backward passes in float64."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import PooledSpan
from .errors import DataError


@dataclass
class LengthEmbeddingTable:
    rows: np.ndarray  # (max_length, d3); row L-1 embeds span length L

    @property
    def max_length(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def embedding(self, length: int) -> np.ndarray:
        if not 1 <= length <= self.max_length:
            raise DataError(
                f"span length {length} exceeds the length-embedding table size {self.max_length}"
            )
        return self.rows[length - 1]


class ProjectionFFN:
    """Affine layers with a rectified-linear (or identity) activation between
    them and no activation after the last layer. Weights are (in, out) so a
    forward pass is x @ W + b."""

    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray], activation: str = "relu"):
        if len(weights) != len(biases) or not weights:
            raise DataError("FFN needs matching, non-empty weight and bias lists")
        if activation not in ("relu", "identity"):
            raise DataError(f"unknown activation '{activation}'")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise DataError(f"layer {i}: weight {w.shape} and bias {b.shape} are inconsistent")
            if i > 0 and weights[i - 1].shape[1] != w.shape[0]:
                raise DataError(f"layer {i}: input dim {w.shape[0]} does not chain")
        self.weights = weights
        self.biases = biases
        self.activation = activation

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]

    def _act(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(z, 0.0) if self.activation == "relu" else z

    def _act_grad(self, z: np.ndarray) -> np.ndarray:
        # derivative at exactly 0 is defined as 0
        return (z > 0.0).astype(np.float64) if self.activation == "relu" else np.ones_like(z)

    def forward(self, x: np.ndarray):
        """Returns (output, cache); accepts a single vector or an (M, in) batch."""
        single = x.ndim == 1
        a = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if a.shape[1] != self.in_dim:
            raise DataError(f"input dim {a.shape[1]} does not match FFN input {self.in_dim}")
        inputs = []
        preacts = []
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            inputs.append(a)
            z = a @ w + b
            preacts.append(z)
            a = self._act(z) if i < len(self.weights) - 1 else z
        out = a[0] if single else a
        return out, (inputs, preacts)

    def copy(self) -> "ProjectionFFN":
        return ProjectionFFN(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.activation,
        )


@dataclass
class SpanRepresentation:
    raw: np.ndarray        # concat(pooled, length embedding)
    projected: np.ndarray  # FFN output in the prototype space


def represent_span(
    pooled: PooledSpan, table: LengthEmbeddingTable, ffn: ProjectionFFN
) -> SpanRepresentation:
    raw = np.concatenate([pooled.pooled, table.embedding(pooled.span.length)])
    projected, _ = ffn.forward(raw)
    return SpanRepresentation(raw=raw, projected=projected)


def ffn_backward(ffn: ProjectionFFN, raw: np.ndarray, upstream: np.ndarray, cache=None):
    """Reverse-mode gradients for one input: (weight grads, bias grads, input grad)."""
    w_grads, b_grads, x_grad = ffn_backward_batch(
        ffn, np.atleast_2d(raw), np.atleast_2d(upstream), cache
    )
    return w_grads, b_grads, x_grad[0]


def ffn_backward_batch(ffn: ProjectionFFN, raw: np.ndarray, upstream: np.ndarray, cache=None):
    """Batched reverse pass; gradients are summed over the batch rows."""
    raw = np.atleast_2d(np.asarray(raw, dtype=np.float64))
    upstream = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
    if upstream.shape != (raw.shape[0], ffn.out_dim):
        raise DataError(
            f"upstream gradient shape {upstream.shape} does not match "
            f"({raw.shape[0]}, {ffn.out_dim})"
        )
    if cache is None:
        _, cache = ffn.forward(raw)
    inputs, preacts = cache
    n_layers = len(ffn.weights)
    w_grads = [np.empty(0)] * n_layers
    b_grads = [np.empty(0)] * n_layers
    dz = upstream
    for i in range(n_layers - 1, -1, -1):
        w_grads[i] = inputs[i].T @ dz
        b_grads[i] = dz.sum(axis=0)
        da = dz @ ffn.weights[i].T
        if i > 0:
            dz = da * ffn._act_grad(preacts[i - 1])
        else:
            dz = da
    return w_grads, b_grads, dz


def init_projection(
    d2: int,
    d3: int,
    d1: int,
    hidden: int,
    seed: int,
    epsilon: int = 10,
    num_layers: int = 3,
    activation: str = "relu",
):
    """Fresh length-embedding table and FFN.

    Weights are Gaussian with std sqrt(2 / fan_in), biases zero, length
    embeddings Gaussian with std 0.02; deterministic per seed.
    """
    for name, value in (("d2", d2), ("d3", d3), ("d1", d1), ("hidden", hidden),
                        ("epsilon", epsilon), ("num_layers", num_layers)):
        if value < 1:
            raise DataError(f"{name} must be >= 1, got {value}")
    rng = np.random.Generator(np.random.PCG64(seed))
    table = LengthEmbeddingTable(rows=rng.normal(0.0, 0.02, size=(epsilon, d3)))
    if num_layers == 1:
        dims = [(d2 + d3, d1)]
    else:
        dims = [(d2 + d3, hidden)]
        dims += [(hidden, hidden)] * (num_layers - 2)
        dims.append((hidden, d1))
    weights = []
    biases = []
    for fan_in, fan_out in dims:
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return table, ProjectionFFN(weights, biases, activation)
