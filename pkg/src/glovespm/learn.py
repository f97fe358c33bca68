"""One-vs-rest linear classifiers trained by deterministic full-batch descent."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ModelKind(str, enum.Enum):
    LOGISTIC = "LOGISTIC"
    HINGE = "HINGE"


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1e-3
    max_iters: int = 500
    tolerance: float = 1e-6
    learning_rate: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.max_iters < 0:
            raise ValueError("max_iters must be >= 0")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")

    def header(self) -> str:
        return (
            f"l2_lambda={self.l2_lambda!r} max_iters={self.max_iters} tolerance={self.tolerance!r} "
            f"learning_rate={self.learning_rate!r} seed={self.seed}"
        )


@dataclass(frozen=True)
class LinearModelOvR:
    labels: tuple[str, ...]
    weights: np.ndarray  # classes x features
    biases: np.ndarray  # classes
    kind: ModelKind
    config: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        labels = tuple(self.labels)
        w = np.asarray(self.weights, dtype=np.float64)
        b = np.asarray(self.biases, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != len(labels) or b.shape != (len(labels),):
            raise ValueError("one weight row and one bias per label required")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate labels")
        order = sorted(range(len(labels)), key=lambda i: labels[i])
        w = w[order].copy()
        b = b[order].copy()
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "labels", tuple(labels[i] for i in order))
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "kind", ModelKind(self.kind))

    @property
    def num_features(self) -> int:
        return self.weights.shape[1]

    def decision_function(self, X) -> np.ndarray:
        X = _values(X)
        if X.ndim != 2 or X.shape[1] != self.num_features:
            raise ValueError(f"expected {self.num_features} features, got shape {X.shape}")
        return X @ self.weights.T + self.biases

    def to_text(self) -> str:
        lines = [
            f"# kind={self.kind.value}",
            f"# config {self.config.header()}",
            "# vocabulary\t" + "\t".join(self.labels),
        ]
        for lab, b, w in zip(self.labels, self.biases, self.weights):
            lines.append("\t".join([lab, f"{b:.16e}"] + [f"{v:.16e}" for v in w]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LinearModelOvR":
        lines = text.splitlines()
        if len(lines) < 3 or not lines[0].startswith("# kind="):
            raise ValueError("not a model file")
        kind = lines[0].split("=", 1)[1].strip()
        kv = dict(tok.split("=", 1) for tok in lines[1].split()[2:])
        cfg = TrainConfig(
            l2_lambda=float(kv["l2_lambda"]),
            max_iters=int(kv["max_iters"]),
            tolerance=float(kv["tolerance"]),
            learning_rate=float(kv["learning_rate"]),
            seed=int(kv["seed"]),
        )
        labels, biases, weights = [], [], []
        for line in lines[3:]:
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            labels.append(cells[0])
            biases.append(float(cells[1]))
            weights.append([float(c) for c in cells[2:]])
        return cls(tuple(labels), np.array(weights, dtype=np.float64).reshape(len(labels), -1),
                   np.array(biases), kind, cfg)


def _values(X) -> np.ndarray:
    return np.asarray(getattr(X, "values", X), dtype=np.float64)


def _xy(X, y=None):
    values = _values(X)
    labels = y if y is not None else getattr(X, "row_labels", None)
    if labels is None:
        raise ValueError("labels required: pass y or a matrix carrying row_labels")
    labels = list(labels)
    if values.ndim != 2 or values.shape[0] != len(labels):
        raise ValueError(f"feature matrix {values.shape} does not match {len(labels)} labels")
    if not np.all(np.isfinite(values)):
        raise ValueError("feature matrix contains non-finite values")
    vocab = tuple(sorted(set(labels)))
    if len(vocab) < 2:
        raise ValueError("at least two classes are required for one-vs-rest training")
    index = {lab: i for i, lab in enumerate(vocab)}
    ids = np.array([index[lab] for lab in labels])
    targets = (ids[:, None] == np.arange(len(vocab))[None, :]).astype(np.float64)
    return values, targets, vocab


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def logistic_loss_and_grad(w, b, X, y, l2_lambda):
    """L2-regularised mean log-loss of one binary task (y in {0, 1}).

    Works column-wise too: ``w`` (D, C), ``b`` (C,), ``y`` (N, C).
    """
    z = X @ w + b
    loss = np.mean(np.logaddexp(0.0, z) - y * z, axis=0) + 0.5 * l2_lambda * np.sum(w * w, axis=0)
    r = (_sigmoid(z) - y) / X.shape[0]
    return loss, X.T @ r + l2_lambda * w, r.sum(axis=0)


def train_logistic_ovr(X, cfg: TrainConfig = TrainConfig(), y: Sequence[str] | None = None) -> LinearModelOvR:
    values, targets, vocab = _xy(X, y)
    d, c = values.shape[1], len(vocab)
    W = np.zeros((d, c))
    b = np.zeros(c)
    active = np.ones(c, dtype=bool)
    for _ in range(cfg.max_iters):
        _, gw, gb = logistic_loss_and_grad(W, b, values, targets, cfg.l2_lambda)
        gmax = np.maximum(np.abs(gw).max(axis=0, initial=0.0), np.abs(gb))
        active &= gmax >= cfg.tolerance
        if not active.any():
            break
        W[:, active] -= cfg.learning_rate * gw[:, active]
        b[active] -= cfg.learning_rate * gb[active]
    return LinearModelOvR(vocab, W.T, b, ModelKind.LOGISTIC, cfg)


def hinge_loss_and_subgrad(w, b, X, s, l2_lambda):
    """L2-regularised mean hinge loss for targets ``s`` in {-1, +1}."""
    margin = s * (X @ w + b)
    act = (margin < 1.0) * s / X.shape[0]
    loss = np.mean(np.maximum(0.0, 1.0 - margin), axis=0) + 0.5 * l2_lambda * np.sum(w * w, axis=0)
    return loss, l2_lambda * w - X.T @ act, -act.sum(axis=0)


def train_svm_ovr(X, cfg: TrainConfig = TrainConfig(), y: Sequence[str] | None = None) -> LinearModelOvR:
    values, targets, vocab = _xy(X, y)
    s = 2.0 * targets - 1.0
    W = np.zeros((values.shape[1], len(vocab)))
    b = np.zeros(len(vocab))
    for t in range(cfg.max_iters):
        eta = cfg.learning_rate / (1.0 + t * cfg.l2_lambda)
        _, gw, gb = hinge_loss_and_subgrad(W, b, values, s, cfg.l2_lambda)
        W -= eta * gw
        b -= eta * gb
    return LinearModelOvR(vocab, W.T, b, ModelKind.HINGE, cfg)


def train(kind: str | ModelKind, X, cfg: TrainConfig = TrainConfig(), y=None) -> LinearModelOvR:
    kind = ModelKind(kind)
    if kind is ModelKind.LOGISTIC:
        return train_logistic_ovr(X, cfg, y)
    return train_svm_ovr(X, cfg, y)


def predict(model: LinearModelOvR, X) -> list[str]:
    """Argmax of per-class scores; exact ties go to the earliest label in sorted order."""
    scores = model.decision_function(X)
    return [model.labels[i] for i in np.argmax(scores, axis=1)]


# -------------------------------------------------------------------- metrics


@dataclass(frozen=True)
class Metrics:
    labels: tuple[str, ...]
    confusion: np.ndarray  # rows = truth, cols = prediction
    precision: float
    recall: float
    f1: float
    error: float
    per_class_precision: np.ndarray
    per_class_recall: np.ndarray

    @property
    def accuracy(self) -> float:
        return 1.0 - self.error

    def confusion_csv(self) -> str:
        lines = ["truth\\pred," + ",".join(self.labels)]
        for lab, row in zip(self.labels, self.confusion):
            lines.append(lab + "," + ",".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def evaluate(predicted: Sequence[str], truth: Sequence[str], vocabulary: Sequence[str]) -> Metrics:
    predicted, truth = list(predicted), list(truth)
    if len(predicted) != len(truth):
        raise ValueError(f"{len(predicted)} predictions for {len(truth)} truth labels")
    vocab = tuple(sorted(set(vocabulary)))
    index = {lab: i for i, lab in enumerate(vocab)}
    for lab in set(predicted) | set(truth):
        if lab not in index:
            raise ValueError(f"label {lab!r} not in vocabulary")
    c = len(vocab)
    conf = np.zeros((c, c), dtype=np.int64)
    for t, p in zip(truth, predicted):
        conf[index[t], index[p]] += 1
    tp = np.diag(conf).astype(np.float64)
    col = conf.sum(axis=0)
    row = conf.sum(axis=1)
    prec = np.divide(tp, col, out=np.zeros(c), where=col > 0)
    rec = np.divide(tp, row, out=np.zeros(c), where=row > 0)
    denom = prec + rec
    f1 = np.divide(2 * prec * rec, denom, out=np.zeros(c), where=denom > 0)
    n = len(truth)
    error = float(n - int(tp.sum())) / n if n else 0.0
    conf.setflags(write=False)
    return Metrics(vocab, conf, float(prec.mean()), float(rec.mean()), float(f1.mean()), error, prec, rec)
