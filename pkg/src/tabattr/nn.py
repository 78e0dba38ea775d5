"""Fixed-architecture ReLU MLP: init, training, prediction, input gradients.

The benchmark model is Input -> 256 -> 256 -> 128 -> 64 -> C with ReLU
between layers and no normalisation or dropout, trained with Adam on
softmax cross-entropy. Weights live in plain numpy arrays so that the
exact forward/backward arithmetic is visible and reproducible.

All per-feature explanation code differentiates the maximum logit (the
predicted-class score), not the loss; see ``input_gradient``.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace

import numpy as np

from .rng import stream

BENCHMARK_HIDDEN_DIMS = (256, 256, 128, 64)


class ShapeMismatchError(ValueError):
    """Array dimensions do not match what the model declares."""


class TrainingDivergenceError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, message: str | None = None):
        self.epoch = epoch
        super().__init__(message or f"non-finite training loss at epoch {epoch}")


class CheckpointError(ValueError):
    """A model checkpoint file could not be parsed."""


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 256
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class MlpModel:
    """Dense ReLU network; ``weights[i]`` has shape (out_dim, in_dim)."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int = 0
    train_epochs: int = 0
    final_train_accuracy: float | None = None

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def num_classes(self) -> int:
        return self.layer_dims[-1]

    def copy(self) -> "MlpModel":
        return replace(
            self,
            layer_dims=list(self.layer_dims),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
        )


def init_mlp(input_dim: int, num_classes: int, seed: int,
             hidden_dims: tuple[int, ...] = BENCHMARK_HIDDEN_DIMS) -> MlpModel:
    """Fan-in-scaled uniform initialisation: weights and biases drawn from
    U(-1/sqrt(fan_in), 1/sqrt(fan_in)), deterministic given the seed.

    The init scale shapes the trained network's gradient second-moment
    spectrum (and with it the retained filter rank), so it is part of
    the reproducibility contract, not a free knob.
    """
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if num_classes < 2:
        raise ValueError("num_classes must be >= 2")
    dims = [input_dim, *hidden_dims, num_classes]
    rng = stream(seed, "mlp-init")
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(layer_dims=dims, weights=weights, biases=biases, seed=seed)


def _check_batch(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-D batch, got ndim={batch.ndim}")
    if batch.shape[1] != model.input_dim:
        raise ShapeMismatchError(
            f"batch has {batch.shape[1]} features, model expects {model.input_dim}")
    return batch


def _forward_cached(model: MlpModel, batch: np.ndarray):
    """Forward pass keeping pre-activations and activations for backprop."""
    pre, act = [], [batch]
    a = batch
    last = len(model.weights) - 1
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ W.T + b
        pre.append(z)
        a = np.maximum(z, 0.0) if i < last else z
        act.append(a)
    return pre, act


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Logits for a batch, shape (n, C)."""
    batch = _check_batch(model, batch)
    _, act = _forward_cached(model, batch)
    return act[-1]


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def predict(model: MlpModel, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row (argmax label, max softmax probability). Ties pick the lowest index."""
    logits = forward(model, batch)
    labels = np.argmax(logits, axis=1)
    conf = softmax(logits).max(axis=1)
    return labels, conf


def input_gradient(model: MlpModel, batch: np.ndarray,
                   classes: np.ndarray | None = None) -> np.ndarray:
    """Gradient of the predicted-class logit with respect to each input row.

    Row i holds d(logit_c)/dx evaluated at batch[i], where c is the argmax
    class at batch[i] (or ``classes[i]`` when given, which pins the class
    for path-integral methods). The ReLU subgradient at exactly zero
    pre-activation is taken to be 0.
    """
    batch = _check_batch(model, batch)
    pre, _ = _forward_cached(model, batch)
    logits = pre[-1]
    if classes is None:
        classes = np.argmax(logits, axis=1)
    else:
        classes = np.asarray(classes, dtype=np.intp)
        if classes.shape != (batch.shape[0],):
            raise ShapeMismatchError("classes must have one entry per batch row")
    delta = np.zeros_like(logits)
    delta[np.arange(batch.shape[0]), classes] = 1.0
    for i in range(len(model.weights) - 1, 0, -1):
        delta = (delta @ model.weights[i]) * (pre[i - 1] > 0)
    return delta @ model.weights[0]


def epoch_shuffle(seed: int, epoch: int, n: int) -> np.ndarray:
    """Minibatch ordering: a permutation of row indices keyed by (seed, epoch)."""
    return stream(seed, "shuffle", epoch).permutation(n)


def cross_entropy(logits: np.ndarray, labels: np.ndarray) -> float:
    """Mean softmax cross-entropy, computed with log-sum-exp stabilisation."""
    m = logits.max(axis=1, keepdims=True)
    lse = m[:, 0] + np.log(np.exp(logits - m).sum(axis=1))
    return float(np.mean(lse - logits[np.arange(len(labels)), labels]))


def train(model: MlpModel, train_X: np.ndarray, train_y: np.ndarray,
          config: TrainConfig) -> MlpModel:
    """Adam training on softmax cross-entropy; deterministic given config.seed.

    Returns a new model; the input model is not modified. Raises
    TrainingDivergenceError (with the epoch index) if the loss goes
    non-finite.
    """
    train_X = _check_batch(model, train_X)
    train_y = np.asarray(train_y, dtype=np.intp)
    if train_y.ndim != 1 or len(train_y) != len(train_X):
        raise ShapeMismatchError("train_y must be a label per train_X row")
    if train_y.min(initial=0) < 0 or train_y.max(initial=0) >= model.num_classes:
        raise ValueError(f"labels must lie in [0, {model.num_classes})")

    out = model.copy()
    n = len(train_X)
    b1, b2, eps = config.adam_beta1, config.adam_beta2, config.adam_eps
    mW = [np.zeros_like(w) for w in out.weights]
    vW = [np.zeros_like(w) for w in out.weights]
    mB = [np.zeros_like(b) for b in out.biases]
    vB = [np.zeros_like(b) for b in out.biases]
    t = 0
    last = len(out.weights) - 1

    for epoch in range(config.epochs):
        order = epoch_shuffle(config.seed, epoch, n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb, yb = train_X[idx], train_y[idx]
            pre, act = _forward_cached(out, xb)
            loss = cross_entropy(pre[-1], yb)
            if not np.isfinite(loss):
                raise TrainingDivergenceError(epoch)
            delta = softmax(pre[-1])
            delta[np.arange(len(yb)), yb] -= 1.0
            delta /= len(yb)
            t += 1
            corr1 = 1.0 - b1 ** t
            corr2 = 1.0 - b2 ** t
            for i in range(last, -1, -1):
                gW = delta.T @ act[i]
                gB = delta.sum(axis=0)
                if i > 0:
                    delta = (delta @ out.weights[i]) * (pre[i - 1] > 0)
                mW[i] = b1 * mW[i] + (1 - b1) * gW
                vW[i] = b2 * vW[i] + (1 - b2) * gW * gW
                out.weights[i] -= config.learning_rate * (mW[i] / corr1) / (
                    np.sqrt(vW[i] / corr2) + eps)
                mB[i] = b1 * mB[i] + (1 - b1) * gB
                vB[i] = b2 * vB[i] + (1 - b2) * gB * gB
                out.biases[i] -= config.learning_rate * (mB[i] / corr1) / (
                    np.sqrt(vB[i] / corr2) + eps)

    out.train_epochs = model.train_epochs + config.epochs
    if config.epochs > 0:
        labels, _ = predict(out, train_X)
        out.final_train_accuracy = float(np.mean(labels == train_y))
    return out


CHECKPOINT_VERSION = 1


def save_model(model: MlpModel, path) -> None:
    """Write a checkpoint: an npz container with a version tag, layer_dims,
    row-major float64 weights/biases, and training metadata."""
    arrays = {
        "format_version": np.array(CHECKPOINT_VERSION, dtype=np.int64),
        "layer_dims": np.asarray(model.layer_dims, dtype=np.int64),
        "seed": np.array(model.seed, dtype=np.int64),
        "train_epochs": np.array(model.train_epochs, dtype=np.int64),
        "final_train_accuracy": np.array(
            np.nan if model.final_train_accuracy is None
            else model.final_train_accuracy, dtype=np.float64),
    }
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        arrays[f"weight_{i}"] = np.ascontiguousarray(w, dtype=np.float64)
        arrays[f"bias_{i}"] = np.ascontiguousarray(b, dtype=np.float64)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as f:
        f.write(buf.getvalue())


def load_model(path) -> MlpModel:
    """Read a checkpoint written by ``save_model``; round-trip is bit-exact."""
    try:
        data = np.load(path)
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint container: {exc}") from exc
    with data:
        try:
            version = int(data["format_version"])
        except KeyError:
            raise CheckpointError("missing section: format_version") from None
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        for key in ("layer_dims", "seed", "train_epochs", "final_train_accuracy"):
            if key not in data:
                raise CheckpointError(f"missing section: {key}")
        dims = [int(v) for v in data["layer_dims"]]
        weights, biases = [], []
        for i in range(len(dims) - 1):
            wk, bk = f"weight_{i}", f"bias_{i}"
            if wk not in data or bk not in data:
                raise CheckpointError(f"missing section: layer {i} arrays")
            w, b = data[wk], data[bk]
            if w.shape != (dims[i + 1], dims[i]) or b.shape != (dims[i + 1],):
                raise ShapeMismatchError(
                    f"layer {i} arrays do not match declared dims {dims[i + 1]}x{dims[i]}")
            weights.append(w)
            biases.append(b)
        acc = float(data["final_train_accuracy"])
        return MlpModel(
            layer_dims=dims,
            weights=weights,
            biases=biases,
            seed=int(data["seed"]),
            train_epochs=int(data["train_epochs"]),
            final_train_accuracy=None if np.isnan(acc) else acc,
        )
