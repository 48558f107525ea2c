"""Two-hidden-layer sigmoid MLP trained by per-sample SGD on mean squared error.

Weights are initialized with numpy's PCG64 generator (``np.random.default_rng``),
which makes a model a pure function of its seed and layer sizes.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from scipy.special import expit

from .zoning import FeatureTable

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ACTIVATION = "sigmoid"


@dataclass
class MlpModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]  # each (fan_out, fan_in)
    biases: list[np.ndarray]
    init_seed: int = 0
    activation: str = ACTIVATION
    # per-feature standardization applied before the first layer; None = identity
    input_mean: Optional[np.ndarray] = None
    input_scale: Optional[np.ndarray] = None
    # extra context for predicting from raw images; not used by the network itself
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.layer_sizes) != 4:
            raise ValueError("an MLP here has exactly 4 layers: input, two hidden, output")
        if self.activation != ACTIVATION:
            raise ValueError(f"unsupported activation {self.activation!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (self.layer_sizes[i + 1], self.layer_sizes[i]) or b.shape != (self.layer_sizes[i + 1],):
                raise ValueError(f"layer {i} parameter shapes do not match layer sizes {self.layer_sizes}")

    def copy(self) -> MlpModel:
        return MlpModel(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.init_seed,
            self.activation,
            None if self.input_mean is None else self.input_mean.copy(),
            None if self.input_scale is None else self.input_scale.copy(),
            dict(self.meta),
        )

    def scale_inputs(self, X: np.ndarray) -> np.ndarray:
        if self.input_mean is None:
            return X
        return (X - self.input_mean) / self.input_scale

    def parameters(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]


@dataclass(frozen=True)
class TrainHyperparams:
    learning_rate: float = 0.5
    epochs: int = 500
    shuffle_seed: int = 42
    h1: int = 32
    h2: int = 32
    standardize: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.h1 < 1 or self.h2 < 1:
            raise ValueError("hidden sizes must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mse: float
    grad_norm: float
    seconds: float


@dataclass
class TrainingTrace:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def to_csv(self) -> str:
        lines = ["epoch,mse,grad_norm,seconds"]
        lines += [f"{r.epoch},{r.mse!r},{r.grad_norm!r},{r.seconds:.3f}" for r in self.records]
        return "\n".join(lines) + "\n"


def mlp_init(h1: int, h2: int, seed: int, n_in: int = 16, n_out: int = 44) -> MlpModel:
    """Uniform weights in [-1/sqrt(fan_in), 1/sqrt(fan_in)], zero biases."""
    if h1 < 1 or h2 < 1 or n_in < 1 or n_out < 1:
        raise ValueError("layer sizes must be >= 1")
    sizes = [n_in, h1, h2, n_out]
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(sizes, weights, biases, init_seed=seed)


def _check_input(m: MlpModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != m.layer_sizes[0]:
        raise ValueError(f"input has {x.shape[0]} values, network expects {m.layer_sizes[0]}")
    return x


def mlp_forward(m: MlpModel, x) -> list[np.ndarray]:
    """Activations of every layer, input first; the last entry is the output.

    The first entry is the input after the model's standardization (if any).
    """
    a = m.scale_inputs(_check_input(m, x))
    acts = [a]
    for w, b in zip(m.weights, m.biases):
        a = expit(w @ a + b)
        acts.append(a)
    return acts


def _one_hot(target_class: int, n: int) -> np.ndarray:
    if not 0 <= target_class < n:
        raise ValueError(f"class {target_class} out of range 0..{n - 1}")
    t = np.zeros(n)
    t[target_class] = 1.0
    return t


def mlp_loss(output, target_class: int) -> float:
    """Mean over output units of (out - one_hot)^2."""
    out = np.asarray(output, dtype=np.float64).ravel()
    t = _one_hot(int(target_class), out.shape[0])
    return float(np.mean((out - t) ** 2))


def _backprop(weights, acts, target: np.ndarray):
    out = acts[-1]
    delta = (2.0 / out.shape[0]) * (out - target) * out * (1.0 - out)
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    for layer in range(len(weights) - 1, -1, -1):
        grad_w[layer] = np.outer(delta, acts[layer])
        grad_b[layer] = delta
        if layer:
            a = acts[layer]
            delta = (delta @ weights[layer]) * a * (1.0 - a)
    return grad_w, grad_b


def mlp_backprop(m: MlpModel, x, target_class: int) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Analytic gradient of :func:`mlp_loss` w.r.t. (weights, biases)."""
    acts = mlp_forward(m, x)
    target = _one_hot(int(target_class), m.layer_sizes[-1])
    return _backprop(m.weights, acts, target)


def mlp_predict(m: MlpModel, x) -> int:
    # np.argmax returns the first maximum, i.e. the smallest class id on ties
    return int(np.argmax(mlp_forward(m, x)[-1]))


def mlp_output_batch(m: MlpModel, X) -> np.ndarray:
    a = m.scale_inputs(np.asarray(X, dtype=np.float64))
    for w, b in zip(m.weights, m.biases):
        a = expit(a @ w.T + b)
    return a


def mlp_predict_batch(m: MlpModel, X) -> np.ndarray:
    return np.argmax(mlp_output_batch(m, X), axis=1).astype(np.int64)


def mean_loss(m: MlpModel, X, class_ids) -> float:
    out = mlp_output_batch(m, X)
    target = np.zeros_like(out)
    target[np.arange(len(out)), np.asarray(class_ids)] = 1.0
    return float(np.mean((out - target) ** 2))


def mlp_train(
    m: MlpModel,
    train: FeatureTable,
    hp: TrainHyperparams,
    on_epoch: Optional[Callable[[int, MlpModel], None]] = None,
) -> tuple[MlpModel, TrainingTrace]:
    """Per-sample SGD; rows are reshuffled every epoch from one generator seeded by
    ``hp.shuffle_seed``. ``on_epoch(epoch, model)`` sees the live model after each epoch.

    With ``hp.standardize`` an untrained model (no input scaling yet) first gets
    per-feature mean/std fitted on ``train``; constant features keep scale 1.
    """
    n = len(train)
    if n == 0:
        raise ValueError("cannot train on an empty table")
    model = m.copy()
    n_out = model.layer_sizes[-1]
    X = train.features
    if X.shape[1] != model.layer_sizes[0]:
        raise ValueError(f"table has {X.shape[1]} features, network expects {model.layer_sizes[0]}")
    if train.class_ids.min() < 0 or train.class_ids.max() >= n_out:
        raise ValueError(f"class ids must lie in 0..{n_out - 1}")
    if hp.standardize and model.input_mean is None:
        std = X.std(axis=0)
        model.input_mean = X.mean(axis=0)
        model.input_scale = np.where(std > 0, std, 1.0)
    X = model.scale_inputs(X)
    targets = np.eye(n_out)[train.class_ids]
    weights, biases = model.weights, model.biases
    lr = hp.learning_rate
    rng = np.random.default_rng(hp.shuffle_seed)
    trace = TrainingTrace()
    start = time.perf_counter()
    for epoch in range(1, hp.epochs + 1):
        grad_w = grad_b = None
        for i in rng.permutation(n):
            a = X[i]
            acts = [a]
            for w, b in zip(weights, biases):
                a = expit(w @ a + b)
                acts.append(a)
            grad_w, grad_b = _backprop(weights, acts, targets[i])
            for w, b, gw, gb in zip(weights, biases, grad_w, grad_b):
                w -= lr * gw
                b -= lr * gb
        grad_norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grad_w + grad_b)))
        mse = mean_loss(model, train.features, train.class_ids)
        trace.records.append(EpochRecord(epoch, mse, grad_norm, time.perf_counter() - start))
        if epoch == 1 or epoch == hp.epochs or epoch % 50 == 0:
            log.info("epoch %d mse=%.6f grad_norm=%.6f", epoch, mse, grad_norm)
        if on_epoch is not None:
            on_epoch(epoch, model)
    return model, trace


def finite_difference_check(m: MlpModel, x, target_class: int, eps: float = 1e-4) -> float:
    """Max relative error between backprop and central differences over all parameters."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    probe = m.copy()
    grad_w, grad_b = mlp_backprop(probe, x, target_class)
    worst = 0.0
    for param, grad in zip(probe.parameters(), [g for pair in zip(grad_w, grad_b) for g in pair]):
        flat = param.reshape(-1)
        gflat = grad.reshape(-1)
        for j in range(flat.size):
            orig = flat[j]
            flat[j] = orig + eps
            up = mlp_loss(mlp_forward(probe, x)[-1], target_class)
            flat[j] = orig - eps
            down = mlp_loss(mlp_forward(probe, x)[-1], target_class)
            flat[j] = orig
            numeric = (up - down) / (2 * eps)
            analytic = gflat[j]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
    return worst


# ---------------------------------------------------------------- persistence


def model_to_json(m: MlpModel) -> str:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "layer_sizes": list(m.layer_sizes),
        "activation": m.activation,
        "init_seed": m.init_seed,
        "weights": [w.tolist() for w in m.weights],
        "biases": [b.tolist() for b in m.biases],
        "input_mean": None if m.input_mean is None else m.input_mean.tolist(),
        "input_scale": None if m.input_scale is None else m.input_scale.tolist(),
    }
    doc.update(m.meta)
    return json.dumps(doc) + "\n"


def model_from_json(text: str) -> MlpModel:
    doc = json.loads(text)
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported model schema_version {doc.get('schema_version')!r}")
    core = {"schema_version", "layer_sizes", "activation", "init_seed", "weights", "biases",
            "input_mean", "input_scale"}
    mean, scale = doc.get("input_mean"), doc.get("input_scale")
    return MlpModel(
        [int(v) for v in doc["layer_sizes"]],
        [np.array(w, dtype=np.float64) for w in doc["weights"]],
        [np.array(b, dtype=np.float64) for b in doc["biases"]],
        init_seed=int(doc["init_seed"]),
        activation=doc["activation"],
        input_mean=None if mean is None else np.array(mean, dtype=np.float64),
        input_scale=None if scale is None else np.array(scale, dtype=np.float64),
        meta={k: v for k, v in doc.items() if k not in core},
    )


def save_mlp_model(path: str | Path, m: MlpModel) -> None:
    Path(path).write_text(model_to_json(m), encoding="utf-8")


def load_mlp_model(path: str | Path) -> MlpModel:
    return model_from_json(Path(path).read_text(encoding="utf-8"))
