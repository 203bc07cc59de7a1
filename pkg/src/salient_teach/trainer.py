"""Training of the softmax linear head on stored GAP features.

The model is a single fully-connected layer over global-average-pooled
backbone features, trained with cross-entropy and Adam for a fixed number
of epochs. The problem is convex in (W, b), so the head starts at zero and
the whole run is deterministic given (data order, seed, config): epoch
shuffles come from a seeded generator and gradients accumulate in a fixed
sequential order.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError, PreconditionError, TrainCancelled
from .tensor_core import cross_entropy, logits_gradient, softmax


@dataclass
class TrainConfig:
    """Optimizer hyperparameters. The defaults are the Adam paper's
    published values; epochs defaults to the fixed ten-epoch regime."""

    epochs: int = 10
    batch_size: int = 32
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def validate(self) -> "TrainConfig":
        if self.epochs < 1 or self.batch_size < 1:
            raise InvalidArgumentError("epochs and batch_size must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise InvalidArgumentError("beta1 and beta2 must lie in (0, 1)")
        if self.learning_rate <= 0.0 or self.epsilon <= 0.0:
            raise InvalidArgumentError("learning_rate and epsilon must be > 0")
        return self

    def to_dict(self) -> dict:
        return {
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "learning_rate": self.learning_rate,
            "beta1": self.beta1,
            "beta2": self.beta2,
            "epsilon": self.epsilon,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        return cls(
            epochs=int(data.get("epochs", 10)),
            batch_size=int(data.get("batch_size", 32)),
            learning_rate=float(data.get("learning_rate", 0.001)),
            beta1=float(data.get("beta1", 0.9)),
            beta2=float(data.get("beta2", 0.999)),
            epsilon=float(data.get("epsilon", 1e-8)),
        ).validate()


@dataclass
class LinearHead:
    """Weights of the fully-connected classification layer.

    ``weights`` is (C, K) float64, one row per class; these rows double as
    the channel weights for class activation maps.
    """

    weights: np.ndarray
    bias: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def n_features(self) -> int:
        return self.weights.shape[1]


def init_head(n_classes: int, n_features: int) -> LinearHead:
    """All-zero head: forward gives uniform probabilities, CAM gives zeros."""
    if n_classes < 2 or n_features < 1:
        raise InvalidArgumentError(
            "need at least 2 classes and 1 feature dimension"
        )
    return LinearHead(
        weights=np.zeros((n_classes, n_features), dtype=np.float64),
        bias=np.zeros(n_classes, dtype=np.float64),
    )


def forward(head: LinearHead, gap) -> np.ndarray:
    """Logits z_c = W[c] . gap + b[c]."""
    gap = np.asarray(gap, dtype=np.float64)
    if gap.shape != (head.n_features,):
        raise InvalidArgumentError(
            f"feature vector of length {gap.shape} does not match "
            f"head with {head.n_features} inputs"
        )
    return head.weights @ gap + head.bias


@dataclass
class AdamState:
    """First/second-moment accumulators, one pair per parameter tensor."""

    m: list
    v: list
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
        )


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """One Adam update over a list of parameter arrays.

    Bias-corrected moments; epsilon sits outside the square root
    (theta -= lr * m_hat / (sqrt(v_hat) + eps)).
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise InvalidArgumentError("params, grads, and state must align")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise InvalidArgumentError(
                f"gradient shape {g.shape} does not match parameter {p.shape}"
            )
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**t
    bc2 = 1.0 - b2**t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        step = config.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + config.epsilon)
        new_params.append(p - step)
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(m=new_m, v=new_v, t=t)


@dataclass
class TrainReport:
    epoch_losses: list
    final_accuracy: float
    train_ms: float

    def to_dict(self) -> dict:
        return {
            "epoch_losses": [float(x) for x in self.epoch_losses],
            "final_accuracy": float(self.final_accuracy),
            "train_ms": float(self.train_ms),
        }


def batch_loss(weights, bias, features, labels) -> float:
    """Mean cross-entropy of a batch under (weights, bias); the quantity the
    analytic gradients are checked against by finite differences."""
    total = 0.0
    for x, y in zip(features, labels):
        total += cross_entropy(softmax(weights @ x + bias), int(y))
    return total / len(labels)


def batch_gradients(weights, bias, features, labels):
    """Mean analytic gradients (dL/dW, dL/db) over a batch.

    Accumulates per-sample outer products in a fixed sequential order so
    results are reproducible bit for bit.
    """
    g_w = np.zeros_like(weights)
    g_b = np.zeros_like(bias)
    loss_sum = 0.0
    for x, y in zip(features, labels):
        probs = softmax(weights @ x + bias)
        loss_sum += cross_entropy(probs, int(y))
        dz = logits_gradient(probs, int(y))
        g_w += np.outer(dz, x)
        g_b += dz
    n = len(labels)
    return g_w / n, g_b / n, loss_sum


def train(
    features,
    labels,
    n_classes: int,
    config: TrainConfig | None = None,
    seed: int = 0,
    progress=None,
    should_cancel=None,
):
    """Run the fixed-epoch Adam loop and return (LinearHead, TrainReport).

    Each epoch shuffles the sample order with a generator seeded by
    (seed, epoch index), then walks mini-batches of ``batch_size`` (the
    last batch may be smaller), taking one Adam step per batch. The
    reported per-epoch loss is the mean of the losses observed in that
    epoch's forward passes.

    ``progress(epoch, mean_loss)`` fires after each epoch. ``should_cancel``
    is polled between batches; returning True raises TrainCancelled.
    """
    config = (config or TrainConfig()).validate()
    x = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0] or x.shape[0] == 0:
        raise InvalidArgumentError(
            "features must be (n, K) with one label per row"
        )
    if n_classes < 2:
        raise PreconditionError("training needs at least 2 classes")
    if y.min() < 0 or y.max() >= n_classes:
        raise InvalidArgumentError("labels out of range")
    counts = np.bincount(y, minlength=n_classes)
    for c, count in enumerate(counts):
        if count == 0:
            raise PreconditionError(f"class {c} has no samples")

    started = time.perf_counter()
    n, k = x.shape
    head = init_head(n_classes, k)
    params = [head.weights, head.bias]
    state = AdamState.for_params(params)
    epoch_losses = []
    for epoch in range(config.epochs):
        order = np.random.default_rng([seed, epoch]).permutation(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            if should_cancel is not None and should_cancel():
                raise TrainCancelled("training cancelled between batches")
            idx = order[start : start + config.batch_size]
            g_w, g_b, batch_loss_sum = batch_gradients(
                params[0], params[1], x[idx], y[idx]
            )
            loss_sum += batch_loss_sum
            params, state = adam_step(params, [g_w, g_b], state, config)
        epoch_losses.append(loss_sum / n)
        if progress is not None:
            progress(epoch + 1, epoch_losses[-1])

    head = LinearHead(weights=params[0], bias=params[1])
    logits = x @ head.weights.T + head.bias
    accuracy = float(np.mean(np.argmax(logits, axis=1) == y))
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    return head, TrainReport(
        epoch_losses=epoch_losses,
        final_accuracy=accuracy,
        train_ms=elapsed_ms,
    )
