"""Small MLP with explicit forward/backward passes and plain SGD.

Weights are (out, in) matrices applied as ``z = W @ x + b`` with ReLU on
hidden layers and identity on the output. Initialization draws every weight
from uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)) using the package SplitMix64
stream, layer by layer, row-major; biases start at zero. Gradients are exact
reverse-mode sums over the batch; callers scale the upstream gradient to get
means.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .rng import SplitMix64


@dataclass
class SgdConfig:
    learning_rate: float = 0.3
    epochs: int = 8
    batch_pixels: int = 512
    seed: int = 0
    l2: float = 1e-4

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_pixels < 1:
            raise ValueError("batch_pixels must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray] = field(repr=False)  # per layer, (out, in)
    biases: list[np.ndarray] = field(repr=False)  # per layer, (out,)
    rng_seed: int = 0

    @property
    def in_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def out_dim(self) -> int:
        return self.layer_sizes[-1]

    def is_all_zero(self) -> bool:
        return all(not w.any() for w in self.weights) and all(
            not b.any() for b in self.biases
        )

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            rng_seed=self.rng_seed,
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "layer_sizes": self.layer_sizes,
                "weights": [w.tolist() for w in self.weights],
                "biases": [b.tolist() for b in self.biases],
                "seed": self.rng_seed,
            }
        )

    @staticmethod
    def from_json(text: str) -> "MlpModel":
        doc = json.loads(text)
        return MlpModel(
            layer_sizes=[int(v) for v in doc["layer_sizes"]],
            weights=[np.asarray(w, dtype=np.float64) for w in doc["weights"]],
            biases=[np.asarray(b, dtype=np.float64) for b in doc["biases"]],
            rng_seed=int(doc["seed"]),
        )


def init_mlp(layer_sizes: list[int], seed: int) -> MlpModel:
    """He-style uniform init from the seeded SplitMix64 stream."""
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output layer")
    rng = SplitMix64(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = math.sqrt(6.0 / fan_in)
        w = np.empty((fan_out, fan_in), dtype=np.float64)
        for i in range(fan_out):
            for j in range(fan_in):
                w[i, j] = rng.uniform(-bound, bound)
        weights.append(w)
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return MlpModel(layer_sizes=list(layer_sizes), weights=weights, biases=biases, rng_seed=seed)


def zero_mlp(layer_sizes: list[int]) -> MlpModel:
    return MlpModel(
        layer_sizes=list(layer_sizes),
        weights=[
            np.zeros((o, i)) for i, o in zip(layer_sizes[:-1], layer_sizes[1:])
        ],
        biases=[np.zeros(o) for o in layer_sizes[1:]],
        rng_seed=0,
    )


def _as_batch(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"input dimension {x.shape[0]} != {dim}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"input shape {x.shape} incompatible with dim {dim}")
    return x, False


def forward_cached(model: MlpModel, x: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Logits plus per-layer activations (activations[0] is the input batch)."""
    batch, _ = _as_batch(x, model.in_dim)
    activations = [batch]
    a = batch
    last = len(model.weights) - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w.T + b
        a = z if l == last else np.maximum(z, 0.0)
        activations.append(a)
    return a, activations


def mlp_forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Affine+ReLU composition; accepts a single vector or an (N, D) batch."""
    _, single = _as_batch(x, model.in_dim)
    logits, _ = forward_cached(model, x)
    return logits[0] if single else logits


def mlp_backward(
    model: MlpModel,
    x: np.ndarray,
    upstream: np.ndarray,
    activations: list[np.ndarray] | None = None,
) -> tuple[list[np.ndarray], list[np.ndarray], np.ndarray]:
    """Exact reverse-mode gradients of ``sum(upstream * logits)``.

    Returns (weight_grads, bias_grads, input_grad); batch gradients are
    summed over the batch dimension.
    """
    batch, single = _as_batch(x, model.in_dim)
    up, up_single = _as_batch(upstream, model.out_dim)
    if single != up_single or batch.shape[0] != up.shape[0]:
        raise ValueError("input and upstream batch shapes disagree")
    if activations is None:
        _, activations = forward_cached(model, batch)

    weight_grads: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    bias_grads: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    delta = up
    for l in range(len(model.weights) - 1, -1, -1):
        a_prev = activations[l]
        weight_grads[l] = delta.T @ a_prev
        bias_grads[l] = delta.sum(axis=0)
        delta = delta @ model.weights[l]
        if l > 0:
            delta = delta * (activations[l] > 0.0)
    input_grad = delta[0] if single else delta
    return weight_grads, bias_grads, input_grad


def softmax_cross_entropy(logits: np.ndarray, class_id: int) -> tuple[float, np.ndarray]:
    """Loss -log softmax(logits)[class_id] and its gradient wrt logits."""
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= class_id < logits.shape[-1]:
        raise ValueError(f"class id {class_id} outside 0..{logits.shape[-1] - 1}")
    shifted = logits - logits.max()
    log_z = math.log(np.exp(shifted).sum())
    loss = log_z - shifted[class_id]
    grad = np.exp(shifted - log_z)
    grad[class_id] -= 1.0
    return float(loss), grad


def softmax_cross_entropy_batch(
    logits: np.ndarray, targets: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample losses and logit gradients for an (N, C) batch."""
    logits = np.asarray(logits, dtype=np.float64)
    n = logits.shape[0]
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    losses = log_z - shifted[rows, targets]
    grads = np.exp(shifted - log_z[:, None])
    grads[rows, targets] -= 1.0
    return losses, grads


def sgd_step(
    model: MlpModel,
    weight_grads: list[np.ndarray],
    bias_grads: list[np.ndarray],
    learning_rate: float,
    l2: float = 0.0,
) -> None:
    """In-place plain SGD update; L2 decay applies to weights only."""
    for w, gw in zip(model.weights, weight_grads):
        w -= learning_rate * (gw + l2 * w)
    for b, gb in zip(model.biases, bias_grads):
        b -= learning_rate * gb
