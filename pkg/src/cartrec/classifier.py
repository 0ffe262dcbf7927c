"""Three-layer fully connected classifier over cart vectors.

Two ReLU hidden layers and a softmax output, trained with categorical
cross-entropy.  Forward pass, backpropagation, and the Adam update are all
written out explicitly; numpy only supplies the matrix arithmetic.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "TrainSample",
    "FitConfig",
    "ClassifierModel",
    "DimMismatch",
    "TargetOutOfRange",
    "KOutOfRange",
    "TooFewSamples",
    "forward",
    "loss",
    "fit",
    "top_k",
    "mlp_loss",
    "mlp_loss_and_grads",
    "save_classifier",
    "load_classifier",
]

_MAGIC = b"MLPC"
_FORMAT_VERSION = 1
_PROB_FLOOR = 1e-12


class DimMismatch(ValueError):
    pass


class TargetOutOfRange(ValueError):
    pass


class KOutOfRange(ValueError):
    pass


class TooFewSamples(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TrainSample:
    input: np.ndarray
    target: int


@dataclass(frozen=True)
class FitConfig:
    epochs: int = 10
    batch_size: int = 256
    learning_rate: float = 1e-3  # Adam step size
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    test_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not (0.0 <= self.test_fraction < 1.0):
            raise ValueError("test_fraction must be in [0, 1)")


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    """Weights/biases for the three affine layers plus the class->dish map."""

    weights: tuple[np.ndarray, np.ndarray, np.ndarray]
    biases: tuple[np.ndarray, np.ndarray, np.ndarray]
    label_map: tuple[str, ...]
    trained_at: datetime | None = None
    train_window: tuple[datetime, datetime] | None = None

    @property
    def dims(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def n_classes(self) -> int:
        return self.weights[2].shape[1]


def _forward_batch(
    weights: Sequence[np.ndarray], biases: Sequence[np.ndarray], X: np.ndarray
) -> tuple[np.ndarray, tuple[np.ndarray, np.ndarray]]:
    a1 = np.maximum(X @ weights[0] + biases[0], 0.0)
    a2 = np.maximum(a1 @ weights[1] + biases[1], 0.0)
    logits = a2 @ weights[2] + biases[2]
    logits = logits - logits.max(axis=1, keepdims=True)  # softmax shift for stability
    exp = np.exp(logits)
    probs = exp / exp.sum(axis=1, keepdims=True)
    return probs, (a1, a2)


def forward(model: ClassifierModel, input: Sequence[float]) -> np.ndarray:
    """Probability vector over the K classes for one cart vector."""
    x = np.asarray(input, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dims[0]:
        raise DimMismatch(f"expected input of length {model.dims[0]}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    probs, _ = _forward_batch(model.weights, model.biases, x[None, :])
    return probs[0]


def loss(probabilities: Sequence[float], target: int) -> float:
    """Categorical cross-entropy for one sample: -ln p[target], floored."""
    p = np.asarray(probabilities, dtype=np.float64)
    if not (0 <= target < p.shape[0]):
        raise TargetOutOfRange(f"target {target} outside [0, {p.shape[0]})")
    return float(-math.log(max(float(p[target]), _PROB_FLOOR)))


def mlp_loss(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
) -> float:
    """Mean cross-entropy of a batch; the objective fit() descends."""
    probs, _ = _forward_batch(weights, biases, X)
    picked = np.maximum(probs[np.arange(len(y)), y], _PROB_FLOOR)
    return float(-np.log(picked).mean())


def mlp_loss_and_grads(
    weights: Sequence[np.ndarray],
    biases: Sequence[np.ndarray],
    X: np.ndarray,
    y: np.ndarray,
) -> tuple[float, list[np.ndarray], list[np.ndarray]]:
    """Batch loss plus hand-derived gradients for every weight and bias.

    Softmax and cross-entropy collapse to (probs - onehot) at the logits;
    the ReLU masks use the activations (a > 0 iff preactivation > 0).
    """
    probs, (a1, a2) = _forward_batch(weights, biases, X)
    n = len(y)
    picked = np.maximum(probs[np.arange(n), y], _PROB_FLOOR)
    batch_loss = float(-np.log(picked).mean())

    d3 = probs.copy()
    d3[np.arange(n), y] -= 1.0
    d3 /= n
    g_w3 = a2.T @ d3
    g_b3 = d3.sum(axis=0)

    d2 = d3 @ weights[2].T
    d2[a2 <= 0.0] = 0.0
    g_w2 = a1.T @ d2
    g_b2 = d2.sum(axis=0)

    d1 = d2 @ weights[1].T
    d1[a1 <= 0.0] = 0.0
    g_w1 = X.T @ d1
    g_b1 = d1.sum(axis=0)

    return batch_loss, [g_w1, g_w2, g_w3], [g_b1, g_b2, g_b3]


def fit(
    samples: Sequence[TrainSample],
    dims: Sequence[int],
    config: FitConfig | None = None,
    label_map: Sequence[str] | None = None,
) -> tuple[ClassifierModel, dict[str, list[float | None]]]:
    """Train the network with Adam on shuffled mini-batches.

    Returns the model and per-epoch mean train/test losses ("test" entries
    are None when test_fraction rounds to zero samples).  Deterministic for
    a fixed seed.
    """
    cfg = config or FitConfig()
    dims = list(dims)
    if len(dims) != 4:
        raise DimMismatch(f"dims must be [d_in, h1, h2, K], got {dims}")
    d_in, h1, h2, k = dims
    if len(samples) < 10:
        raise TooFewSamples(f"need at least 10 samples, got {len(samples)}")
    if label_map is None:
        label_map = tuple(f"class-{i}" for i in range(k))
    if len(label_map) != k:
        raise DimMismatch(f"label_map has {len(label_map)} entries, K is {k}")

    X = np.stack([np.asarray(s.input, dtype=np.float64) for s in samples])
    y = np.asarray([s.target for s in samples], dtype=np.int64)
    if X.shape[1] != d_in:
        raise DimMismatch(f"sample inputs have length {X.shape[1]}, d_in is {d_in}")
    if not np.all(np.isfinite(X)):
        raise ValueError("sample inputs must be finite")
    if y.min() < 0 or y.max() >= k:
        raise TargetOutOfRange(f"targets must lie in [0, {k})")

    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(samples))
    n_test = int(round(cfg.test_fraction * len(samples)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]
    if len(train_idx) == 0:
        raise TooFewSamples("test split left no training samples")

    weights = []
    biases = []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))

    m_w = [np.zeros_like(w) for w in weights]
    v_w = [np.zeros_like(w) for w in weights]
    m_b = [np.zeros_like(b) for b in biases]
    v_b = [np.zeros_like(b) for b in biases]
    step = 0

    train_curve: list[float | None] = []
    test_curve: list[float | None] = []
    for _epoch in range(cfg.epochs):
        order = train_idx[rng.permutation(len(train_idx))]
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo : lo + cfg.batch_size]
            batch_loss, g_w, g_b = mlp_loss_and_grads(weights, biases, X[batch], y[batch])
            total += batch_loss * len(batch)
            step += 1
            bc1 = 1.0 - cfg.beta1**step
            bc2 = 1.0 - cfg.beta2**step
            for i in range(3):
                m_w[i] = cfg.beta1 * m_w[i] + (1 - cfg.beta1) * g_w[i]
                v_w[i] = cfg.beta2 * v_w[i] + (1 - cfg.beta2) * g_w[i] ** 2
                weights[i] -= cfg.learning_rate * (m_w[i] / bc1) / (np.sqrt(v_w[i] / bc2) + cfg.epsilon)
                m_b[i] = cfg.beta1 * m_b[i] + (1 - cfg.beta1) * g_b[i]
                v_b[i] = cfg.beta2 * v_b[i] + (1 - cfg.beta2) * g_b[i] ** 2
                biases[i] -= cfg.learning_rate * (m_b[i] / bc1) / (np.sqrt(v_b[i] / bc2) + cfg.epsilon)
        train_curve.append(total / len(order))
        if len(test_idx) > 0:
            test_curve.append(mlp_loss(weights, biases, X[test_idx], y[test_idx]))
        else:
            test_curve.append(None)

    model = ClassifierModel(
        weights=tuple(weights),  # type: ignore[arg-type]
        biases=tuple(biases),  # type: ignore[arg-type]
        label_map=tuple(label_map),
    )
    return model, {"train": train_curve, "test": test_curve}


def top_k(model: ClassifierModel, input: Sequence[float], k: int) -> list[tuple[int, float]]:
    """The k most probable classes, descending; ties go to the lower index."""
    if not (1 <= k <= model.n_classes):
        raise KOutOfRange(f"k must be in [1, {model.n_classes}], got {k}")
    probs = forward(model, input)
    order = np.argsort(-probs, kind="stable")[:k]
    return [(int(i), float(probs[i])) for i in order]


def save_classifier(model: ClassifierModel, path: str | Path) -> None:
    """Write the model in the little-endian MLPC binary layout."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _FORMAT_VERSION, len(model.weights)))
        for w, b in zip(model.weights, model.biases):
            rows, cols = w.shape
            fh.write(struct.pack("<II", rows, cols))
            fh.write(np.ascontiguousarray(w, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
        for dish_id in model.label_map:
            encoded = dish_id.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)


def load_classifier(path: str | Path) -> ClassifierModel:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path}: not a classifier file")
        version, n_layers = struct.unpack("<II", fh.read(8))
        if version != _FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        if n_layers != 3:
            raise ValueError(f"{path}: expected 3 layers, found {n_layers}")
        weights = []
        biases = []
        for _ in range(n_layers):
            rows, cols = struct.unpack("<II", fh.read(8))
            w = np.frombuffer(fh.read(rows * cols * 4), dtype="<f4").reshape(rows, cols)
            b = np.frombuffer(fh.read(cols * 4), dtype="<f4")
            weights.append(w.astype(np.float64))
            biases.append(b.astype(np.float64))
        k = weights[2].shape[1]
        label_map = []
        for _ in range(k):
            (length,) = struct.unpack("<I", fh.read(4))
            label_map.append(fh.read(length).decode("utf-8"))
    return ClassifierModel(
        weights=tuple(weights),  # type: ignore[arg-type]
        biases=tuple(biases),  # type: ignore[arg-type]
        label_map=tuple(label_map),
    )
