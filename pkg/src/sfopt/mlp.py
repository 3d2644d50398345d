"""Small fully-connected relu classifiers, flattened into one parameter vector.

Deep narrow chains of this kind are the stress test for gradient scale: with
only a handful of units per layer, the per-layer gains drift well away from
one, and mean gradient magnitudes in the first and last layers end up octaves
apart even at initialization.  That disparity is exactly what the update
diagnostics feed on.

Parameter layout (fixed, relied on by every consumer): for each layer from
input to output, the weight matrix ``W`` of shape ``(fan_out, fan_in)`` in
row-major order, then the bias vector of length ``fan_out``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .vectors import as_vector, rng_stream

__all__ = [
    "MlpSpec",
    "mlp_init",
    "unpack_params",
    "mlp_loss_grad",
    "mlp_logits",
    "MlpProblem",
]


@dataclass(frozen=True)
class MlpSpec:
    """Architecture description: widths from input to output, seeded init.

    Only relu activations and mean softmax cross-entropy are implemented;
    the fields exist so configs read explicitly, not to offer alternatives.
    """

    layer_widths: tuple[int, ...]
    init_seed: int = 0
    activation: str = "relu"
    loss: str = "softmax_cross_entropy"

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        if any(w < 1 for w in widths):
            raise ValueError(f"all widths must be >= 1, got {widths}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.loss != "softmax_cross_entropy":
            raise ValueError(f"unsupported loss {self.loss!r}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def n_params(self) -> int:
        return sum(
            fan_out * fan_in + fan_out
            for fan_in, fan_out in zip(self.layer_widths[:-1], self.layer_widths[1:])
        )


def mlp_init(spec: MlpSpec) -> np.ndarray:
    """Fan-in-scaled Gaussian weights (std ``sqrt(2 / fan_in)``), zero biases."""
    rng = rng_stream(spec.init_seed, 1)
    chunks = []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        std = math.sqrt(2.0 / fan_in)
        chunks.append(std * rng.standard_normal(fan_out * fan_in))
        chunks.append(np.zeros(fan_out))
    return np.concatenate(chunks)


def unpack_params(spec: MlpSpec, params: np.ndarray):
    """Views of the flat vector as per-layer ``(W, b)`` pairs (no copies)."""
    params = as_vector(params, "params")
    if params.shape[0] != spec.n_params:
        raise ValueError(f"expected {spec.n_params} parameters, got {params.shape[0]}")
    layers = []
    pos = 0
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        w = params[pos:pos + fan_out * fan_in].reshape(fan_out, fan_in)
        pos += fan_out * fan_in
        b = params[pos:pos + fan_out]
        pos += fan_out
        layers.append((w, b))
    return layers


def _forward(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray):
    layers = unpack_params(spec, params)
    activations = [np.asarray(inputs, dtype=np.float64)]
    pre = []
    for i, (w, b) in enumerate(layers):
        z = activations[-1] @ w.T + b
        pre.append(z)
        if i < len(layers) - 1:
            activations.append(np.maximum(z, 0.0))
        else:
            activations.append(z)
    return layers, activations, pre


def mlp_logits(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray) -> np.ndarray:
    """Raw class scores, shape ``(n, n_classes)``."""
    return _forward(spec, params, inputs)[1][-1]


def mlp_loss_grad(spec: MlpSpec, params: np.ndarray, inputs: np.ndarray,
                  labels: np.ndarray):
    """Mean softmax cross-entropy and its exact reverse-mode gradient.

    The log-sum-exp is computed shifted by the row max, so uniformly zero
    logits give exactly ``log(n_classes)``.  Relu backpropagates a zero
    subgradient at kinks.
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = inputs.shape[0]
    if labels.shape != (n,):
        raise ValueError("labels length differs from number of rows")
    layers, activations, pre = _forward(spec, params, inputs)
    logits = activations[-1]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    loss = float(np.mean(log_z - shifted[np.arange(n), labels]))

    probs = np.exp(shifted)
    probs /= probs.sum(axis=1, keepdims=True)
    delta = probs
    delta[np.arange(n), labels] -= 1.0
    delta /= n

    grads = [None] * len(layers)
    for i in range(len(layers) - 1, -1, -1):
        w, _ = layers[i]
        grads[i] = (delta.T @ activations[i], delta.sum(axis=0))
        if i > 0:
            delta = (delta @ w) * (pre[i - 1] > 0.0)

    flat = np.concatenate([np.concatenate([gw.ravel(), gb]) for gw, gb in grads])
    return loss, flat


class MlpProblem:
    """Training objective of an MLP on a dataset, optionally mini-batched.

    With ``batch_size=None`` the oracle is the deterministic full-train-split
    loss.  With a batch size, every ``value_and_gradient`` call consumes the
    next slice of a seeded per-epoch shuffle, so a fresh instance with the
    same ``(seed, stream_id)`` replays the identical batch sequence; that is
    what makes paired runs comparable step by step.
    """

    def __init__(self, spec: MlpSpec, dataset, batch_size: int | None = None,
                 seed: int = 0, stream_id=2):
        if dataset.dim != spec.layer_widths[0]:
            raise ValueError(
                f"dataset dim {dataset.dim} != input width {spec.layer_widths[0]}")
        if dataset.n_classes != spec.layer_widths[-1]:
            raise ValueError(
                f"{dataset.n_classes} classes != output width {spec.layer_widths[-1]}")
        if batch_size is not None and batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {batch_size}")
        self.spec = spec
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = int(seed)
        self.stream_id = tuple(stream_id) if isinstance(stream_id, (tuple, list)) else int(stream_id)
        self.train_idx, self.test_idx = dataset.split_indices()
        self.reset()

    @property
    def dim(self) -> int:
        return self.spec.n_params

    @property
    def steps_per_epoch(self) -> int:
        if self.batch_size is None:
            return 1
        return math.ceil(len(self.train_idx) / self.batch_size)

    def reset(self):
        """Rewind the batch stream to the first batch of the first epoch."""
        self._rng = rng_stream(self.seed, self.stream_id)
        self._order = None
        self._pos = 0

    def _next_batch(self) -> np.ndarray:
        if self._order is None or self._pos >= len(self.train_idx):
            self._order = self.train_idx[self._rng.permutation(len(self.train_idx))]
            self._pos = 0
        batch = self._order[self._pos:self._pos + self.batch_size]
        self._pos += self.batch_size
        return batch

    def value_and_gradient(self, x):
        """Loss and gradient on the next mini-batch (or the full train split)."""
        if self.batch_size is None:
            idx = self.train_idx
        else:
            idx = self._next_batch()
        return mlp_loss_grad(self.spec, x, self.dataset.inputs[idx],
                             self.dataset.labels[idx])

    def gradient(self, x) -> np.ndarray:
        return self.value_and_gradient(x)[1]

    def value(self, x) -> float:
        """Full train-split loss; does not advance the batch stream."""
        return mlp_loss_grad(self.spec, x, self.dataset.inputs[self.train_idx],
                             self.dataset.labels[self.train_idx])[0]

    def error_rate(self, x, split: str = "test") -> float:
        """Misclassification rate on the chosen split."""
        if split == "test":
            idx = self.test_idx
        elif split == "train":
            idx = self.train_idx
        else:
            raise ValueError(f"unknown split {split!r}")
        logits = mlp_logits(self.spec, x, self.dataset.inputs[idx])
        predicted = logits.argmax(axis=1)
        return float(np.mean(predicted != self.dataset.labels[idx]))
