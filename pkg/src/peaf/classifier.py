"""Small MLP classifier and evaluation utilities (accuracy, ROC)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .features import FeatureMatrix
from .signal_io import stratified_split


def flatten_features(features) -> np.ndarray:
    """Stack features row-major into ``(n_samples, n_inputs)``."""
    if isinstance(features, np.ndarray):
        return np.asarray(features, dtype=np.float64).reshape(len(features), -1)
    rows = [f.values if isinstance(f, FeatureMatrix) else np.asarray(f) for f in features]
    shapes = {r.shape for r in rows}
    if len(shapes) != 1:
        raise ValueError(f"features must share one shape, got {sorted(shapes)}")
    return np.stack([r.reshape(-1) for r in rows]).astype(np.float64)


def standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    return mean, std


@dataclass
class MlpModel:
    """Rectified hidden layers, softmax output, with its input standardization."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    mean: np.ndarray
    std: np.ndarray
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: weight/bias shape mismatch")
            if i and W.shape[0] != self.weights[i - 1].shape[1]:
                raise ValueError(f"layer {i}: input size does not chain")
        if self.mean.shape != (self.weights[0].shape[0],):
            raise ValueError("standardization size does not match the input layer")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(W.shape[1] for W in self.weights)

    @classmethod
    def init(cls, sizes: Sequence[int], rng: np.random.Generator, mean=None, std=None):
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            weights.append(rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in))
            biases.append(np.zeros(fan_out))
        mean = np.zeros(sizes[0]) if mean is None else mean
        std = np.ones(sizes[0]) if std is None else std
        return cls(weights, biases, mean, std)

    def params(self) -> list[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def standardize(self, X) -> np.ndarray:
        return (flatten_features(X) - self.mean) / self.std

    def logits(self, Z: np.ndarray) -> np.ndarray:
        h = Z
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W + b, 0.0)
        return h @ self.weights[-1] + self.biases[-1]

    def predict_proba(self, X) -> np.ndarray:
        return softmax(self.logits(self.standardize(X)))

    def to_dict(self) -> dict:
        return {
            "sizes": list(self.sizes),
            "weights": [W.reshape(-1).tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "class_names": list(self.class_names),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        sizes = d["sizes"]
        weights = [
            np.array(w, dtype=np.float64).reshape(i, o)
            for w, i, o in zip(d["weights"], sizes[:-1], sizes[1:])
        ]
        return cls(
            weights,
            [np.array(b, dtype=np.float64) for b in d["biases"]],
            np.array(d["mean"], dtype=np.float64),
            np.array(d["std"], dtype=np.float64),
            tuple(d.get("class_names", ())),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "MlpModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, y: np.ndarray) -> float:
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    return float(-logp[np.arange(y.size), y].mean())


def loss_and_grads(model: MlpModel, Z: np.ndarray, y: np.ndarray):
    """Mean cross-entropy on standardized inputs ``Z`` and its gradients.

    Gradients are returned in ``model.params()`` order (W0, b0, W1, b1, ...).
    """
    acts = [Z]
    pre = []
    h = Z
    for W, b in zip(model.weights[:-1], model.biases[:-1]):
        a = h @ W + b
        pre.append(a)
        h = np.maximum(a, 0.0)
        acts.append(h)
    logits = h @ model.weights[-1] + model.biases[-1]
    loss = cross_entropy(logits, y)

    delta = softmax(logits)
    delta[np.arange(y.size), y] -= 1.0
    delta /= y.size
    grads = []
    for k in range(len(model.weights) - 1, -1, -1):
        grads.append(delta.sum(axis=0))
        grads.append(acts[k].T @ delta)
        if k:
            delta = (delta @ model.weights[k].T) * (pre[k - 1] > 0)
    grads.reverse()
    return loss, grads


def sgd_step(model: MlpModel, grads, lr: float) -> None:
    for p, g in zip(model.params(), grads):
        p -= lr * g


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (64,)
    epochs: int = 50
    learning_rate: float = 0.05
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = 0.2


@dataclass
class TrainReport:
    losses: list[float]  # losses[0] is the initial full-training-set loss
    train_accuracy: float
    val_accuracy: float | None
    seed: int
    epochs: int
    train_index: list[int] = field(default_factory=list)
    val_index: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "losses": self.losses,
            "train_accuracy": self.train_accuracy,
            "val_accuracy": self.val_accuracy,
            "seed": self.seed,
            "epochs": self.epochs,
            "train_index": self.train_index,
            "val_index": self.val_index,
        }


def accuracy(scores: np.ndarray, labels) -> float:
    # np.argmax returns the lowest index among ties
    return float(np.mean(np.argmax(scores, axis=1) == np.asarray(labels)))


def train_mlp(features, labels, config: TrainConfig = TrainConfig()):
    """Mini-batch gradient descent on cross-entropy; deterministic given ``config.seed``."""
    X = flatten_features(features)
    y = np.asarray(labels, dtype=int)
    if X.shape[0] != y.size:
        raise ValueError("features and labels differ in length")
    n_classes = int(y.max()) + 1
    if np.unique(y).size < 2:
        raise ValueError("training needs at least two classes")

    if config.val_fraction > 0:
        tr, va = stratified_split(y, config.val_fraction, config.seed)
    else:
        tr, va = np.arange(y.size), np.array([], dtype=int)
    mean, std = standardization(X[tr])
    rng = np.random.default_rng(config.seed)
    model = MlpModel.init((X.shape[1], *config.hidden, n_classes), rng, mean, std)

    Ztr, ytr = (X[tr] - mean) / std, y[tr]
    losses = [cross_entropy(model.logits(Ztr), ytr)]
    for _ in range(config.epochs):
        order = rng.permutation(ytr.size)
        for start in range(0, ytr.size, config.batch_size):
            idx = order[start : start + config.batch_size]
            _, grads = loss_and_grads(model, Ztr[idx], ytr[idx])
            sgd_step(model, grads, config.learning_rate)
        losses.append(cross_entropy(model.logits(Ztr), ytr))

    train_acc = accuracy(model.logits(Ztr), ytr)
    val_acc = accuracy(model.logits((X[va] - mean) / std), y[va]) if va.size else None
    report = TrainReport(losses, train_acc, val_acc, config.seed, config.epochs, tr.tolist(), va.tolist())
    return model, report


def evaluate(model: MlpModel, features, labels) -> tuple[float, np.ndarray]:
    """Accuracy (argmax, ties to the lowest class) and softmax scores."""
    X = flatten_features(features)
    if X.shape[1] != model.sizes[0]:
        raise ValueError(f"model expects {model.sizes[0]} inputs, got {X.shape[1]}")
    scores = model.predict_proba(X)
    return accuracy(scores, labels), scores


# --------------------------------------------------------------------- ROC


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # thresholds[k] yields (fpr[k], tpr[k]); first is +inf
    auc: float

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("fpr,tpr\n")
            for f, t in zip(self.fpr, self.tpr):
                fh.write(f"{f!r},{t!r}\n")


def roc_curve(scores, labels) -> RocCurve:
    """ROC over all distinct score thresholds (positive iff ``score >= threshold``)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC needs both positive and negative labels")
    order = np.argsort(-scores, kind="stable")
    s, lab = scores[order], labels[order]
    # last index of each run of equal scores
    last = np.flatnonzero(np.r_[s[1:] != s[:-1], True])
    tp = np.cumsum(lab == 1)[last]
    fp = np.cumsum(lab == 0)[last]
    fpr = np.r_[0.0, fp / n_neg]
    tpr = np.r_[0.0, tp / n_pos]
    thresholds = np.r_[np.inf, s[last]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(fpr, tpr, thresholds, auc)


def operating_point(
    curve: RocCurve, n_negatives: int, duration_hours: float, max_false_alarms_per_hour: float = 4.0
) -> tuple[float, float, float]:
    """Highest-TPR point whose false alarms per hour stay within the budget.

    Returns ``(threshold, fpr, tpr)``.
    """
    fa_per_hour = curve.fpr * n_negatives / duration_hours
    ok = np.flatnonzero(fa_per_hour <= max_false_alarms_per_hour + 1e-12)
    k = ok[np.argmax(curve.tpr[ok])]
    return float(curve.thresholds[k]), float(curve.fpr[k]), float(curve.tpr[k])
