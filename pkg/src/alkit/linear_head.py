"""Softmax linear classifier trained by mini-batch SGD on frozen features.

The head is the only trainable object in the whole toolkit: weights ``W``
(C x d') and biases (C,). Training minimizes class-weighted softmax
cross-entropy plus ``weight_decay/2 * ||W||_F^2`` (bias undecayed) with
SGD + momentum, an optional cosine or step learning-rate schedule, and
early stopping on validation accuracy.

Parameters and gradients are kept in float64; feature matrices stay in
their stored precision (typically float32) and are upcast per batch. Large
learning rates (the linear-evaluation regime uses lr around 15) are
numerically unsafe in float32 accumulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, ShapeError, WeightingError


@dataclass
class LinearHead:
    """Weights and biases of the softmax classifier."""

    W: np.ndarray  # (C, d') float64
    bias: np.ndarray  # (C,) float64

    def __post_init__(self):
        self.W = np.asarray(self.W, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.W.ndim != 2 or self.bias.shape != (self.W.shape[0],):
            raise ShapeError(
                f"head shapes W{self.W.shape} / bias{self.bias.shape} are inconsistent"
            )

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class CosineSchedule:
    t_max: int

    def lr_at(self, base: float, epoch: int) -> float:
        return base * (1.0 + math.cos(math.pi * epoch / self.t_max)) / 2.0


@dataclass(frozen=True)
class StepSchedule:
    factor: float
    every_n_epochs: int

    def lr_at(self, base: float, epoch: int) -> float:
        return base * self.factor ** (epoch // self.every_n_epochs)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    early_stop_patience: int = 25
    batch_size: int = 128
    learning_rate: float = 0.5
    weight_decay: float = 1e-4
    momentum: float = 0.9
    schedule: CosineSchedule | StepSchedule | None = None
    class_weighting: str = "none"  # "none" | "inverse_frequency"
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if self.early_stop_patience < 1 or self.early_stop_patience > self.epochs:
            raise ConfigError("need 1 <= early_stop_patience <= epochs")
        if self.learning_rate <= 0 or self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate must be > 0; momentum/decay >= 0")
        if self.class_weighting not in ("none", "inverse_frequency"):
            raise ConfigError(f"unknown class_weighting {self.class_weighting!r}")

    def lr_at(self, epoch: int) -> float:
        if self.schedule is None:
            return self.learning_rate
        return self.schedule.lr_at(self.learning_rate, epoch)


@dataclass
class TrainResult:
    head: LinearHead
    best_val_accuracy: float
    # One validation accuracy per completed epoch, for early-stop auditing.
    val_history: list[float] = field(default_factory=list)


def logits(head: LinearHead, x: np.ndarray) -> np.ndarray:
    """Class scores ``W x + bias`` for one feature vector or a matrix of rows."""
    x = np.asarray(x)
    if x.shape[-1] != head.feature_dim:
        raise ShapeError(
            f"feature dim {x.shape[-1]} != head dim {head.feature_dim}"
        )
    return x @ head.W.T + head.bias


def predict(head: LinearHead, X: np.ndarray) -> np.ndarray:
    """Row-wise argmax of logits; ties break toward the smaller class index."""
    z = logits(head, X)
    return np.argmax(z, axis=-1)


def class_weights(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Inverse-frequency weights ``n / (C * n_c)``; rare classes weigh more."""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=num_classes)
    if (counts == 0).any():
        missing = int(np.flatnonzero(counts == 0)[0])
        raise WeightingError(
            f"class {missing} has no labeled examples; cannot weight by inverse frequency"
        )
    return len(labels) / (num_classes * counts.astype(np.float64))


def loss_and_grad(
    W: np.ndarray,
    bias: np.ndarray,
    X: np.ndarray,
    y: np.ndarray,
    sample_weights: np.ndarray | None,
    weight_decay: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Weighted softmax cross-entropy and its analytic gradient.

    Loss is the batch mean of ``w_{y_i} * CE_i`` plus
    ``weight_decay/2 * ||W||_F^2``. A single code path supplies both the
    training step and the finite-difference gradient checks.
    """
    n = len(y)
    Z = X @ W.T + bias
    Z = Z - Z.max(axis=1, keepdims=True)
    expZ = np.exp(Z)
    denom = expZ.sum(axis=1)
    ce = np.log(denom) - Z[np.arange(n), y]
    sw = np.ones(n) if sample_weights is None else sample_weights
    loss = float(np.mean(sw * ce)) + 0.5 * weight_decay * float(np.sum(W * W))
    dZ = expZ / denom[:, None]
    dZ[np.arange(n), y] -= 1.0
    dZ *= (sw / n)[:, None]
    gW = dZ.T @ X + weight_decay * W
    gb = dZ.sum(axis=0)
    return loss, gW, gb


def accuracy(head: LinearHead, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(predict(head, X) == np.asarray(y)))


def init_head(num_classes: int, feature_dim: int, rng: np.random.Generator) -> LinearHead:
    """Cold-start parameters: uniform weights with bound 1/sqrt(d'), zero bias."""
    bound = 1.0 / math.sqrt(feature_dim)
    W = rng.uniform(-bound, bound, size=(num_classes, feature_dim))
    return LinearHead(W, np.zeros(num_classes))


def train(
    features: np.ndarray,
    labels: np.ndarray,
    val_features: np.ndarray,
    val_labels: np.ndarray,
    cfg: TrainConfig,
    num_classes: int | None = None,
) -> TrainResult:
    """Train a fresh head on labeled features; return the best-validation snapshot.

    The head is reinitialized from ``cfg.seed`` on every call (no warm
    start across rounds). Training stops once validation accuracy has not
    strictly improved for ``early_stop_patience`` consecutive epochs, and
    the returned parameters are the epoch-end snapshot with the highest
    validation accuracy (first achiever on ties).
    """
    cfg.validate()
    X = np.asarray(features)
    y = np.asarray(labels, dtype=np.int64)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError("features must be 2-D with one row per label")
    if len(y) == 0:
        raise ConfigError("cannot train on an empty labeled set")
    C = int(num_classes) if num_classes is not None else int(max(y.max(), np.asarray(val_labels).max())) + 1
    if y.min() < 0 or y.max() >= C:
        raise ShapeError(f"labels outside [0, {C})")

    sw = None
    if cfg.class_weighting == "inverse_frequency":
        sw = class_weights(y, C)[y]

    rng = np.random.default_rng(np.random.SeedSequence([int(cfg.seed)]))
    head = init_head(C, X.shape[1], rng)
    W, bias = head.W, head.bias
    vW = np.zeros_like(W)
    vb = np.zeros_like(bias)

    best_acc = -1.0
    best_W, best_bias = W.copy(), bias.copy()
    stale = 0
    history: list[float] = []
    n = len(y)

    for epoch in range(cfg.epochs):
        lr = cfg.lr_at(epoch)
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, gW, gb = loss_and_grad(
                W, bias, X[idx], y[idx], None if sw is None else sw[idx], cfg.weight_decay
            )
            if not math.isfinite(loss):
                raise DivergenceError(epoch, lr)
            vW = cfg.momentum * vW + gW
            vb = cfg.momentum * vb + gb
            W -= lr * vW
            bias -= lr * vb
        val_acc = accuracy(LinearHead(W, bias), val_features, val_labels)
        history.append(val_acc)
        if val_acc > best_acc:
            best_acc = val_acc
            best_W, best_bias = W.copy(), bias.copy()
            stale = 0
        else:
            stale += 1
        if stale >= cfg.early_stop_patience:
            break

    return TrainResult(LinearHead(best_W, best_bias), best_acc, history)
