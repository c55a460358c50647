"""Softmax linear classifier trained by maximum likelihood.

The weight matrix has shape ``(K, V + 1)``; the last column multiplies the
constant bias feature, so it plays the role of the bias vector.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import scipy.sparse as sp

from radcotrain.corpus import LabelSpace
from radcotrain.errors import ConfigError, ContractError, TrainingError
from radcotrain.features import FeatureVector

Matrix = Union[sp.csr_matrix, np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    l2_penalty: float = 1e-4
    max_epochs: int = 30
    batch_size: int = 16
    patience: int = 5
    seed: int = 0
    # "adagrad" scales each coordinate's step by its gradient history;
    # "sgd" is the plain update
    optimizer: str = "adagrad"

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adagrad"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.l2_penalty < 0:
            raise ConfigError("l2_penalty must be non-negative")
        for name in ("max_epochs", "batch_size", "patience"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")


@dataclass(frozen=True, eq=False)
class ClassifierParams:
    """Trained weights for one view. ``weights`` is read-only."""

    weights: np.ndarray
    space: LabelSpace
    vocab_fingerprint: str | None = None

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != self.space.k:
            raise ContractError(f"weights must have shape (K={self.space.k}, D), got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ContractError("weights contain non-finite entries")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def zeros(cls, space: LabelSpace, dimension: int, vocab_fingerprint: str | None = None) -> ClassifierParams:
        return cls(np.zeros((space.k, dimension)), space, vocab_fingerprint)

    def save(self, path: str | Path) -> None:
        payload = {
            "task": self.space.task_name,
            "class_names": list(self.space.class_names),
            "vocab_fingerprint": self.vocab_fingerprint,
            "weights": self.weights.tolist(),
        }
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, vocab_fingerprint: str | None = None) -> ClassifierParams:
        """Read params; refuses a file trained against a different vocabulary."""
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        stored = payload.get("vocab_fingerprint")
        if vocab_fingerprint is not None and stored != vocab_fingerprint:
            raise ContractError(f"params were trained on vocabulary {stored}, not {vocab_fingerprint}")
        space = LabelSpace(payload["task"], tuple(payload["class_names"]))
        return cls(np.asarray(payload["weights"], dtype=np.float64), space, stored)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _as_matrix(x, dimension: int) -> Matrix:
    if isinstance(x, FeatureVector):
        x = sp.csr_matrix((x.weights, x.indices, [0, len(x.indices)]), shape=(1, x.dimension))
    elif not sp.issparse(x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if x.shape[1] != dimension:
        raise ContractError(f"feature dimension {x.shape[1]} does not match params dimension {dimension}")
    return x


def predict_proba(params: ClassifierParams, X) -> np.ndarray:
    """Class distributions, one row per row of ``X``."""
    X = _as_matrix(X, params.dimension)
    return softmax(np.asarray(X @ params.weights.T))


def predict_dist(params: ClassifierParams, x: FeatureVector) -> np.ndarray:
    return predict_proba(params, x)[0]


def argmax_with_confidence(dist: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise argmax (first maximum wins) and the maximal probability."""
    labels = np.argmax(dist, axis=-1)
    return labels, np.take_along_axis(dist, labels[..., None], axis=-1)[..., 0]


def predict_labels(params: ClassifierParams, X) -> tuple[np.ndarray, np.ndarray]:
    return argmax_with_confidence(predict_proba(params, X))


def predict_label(params: ClassifierParams, x: FeatureVector) -> tuple[int, float]:
    labels, conf = predict_labels(params, x)
    return int(labels[0]), float(conf[0])


def loss_and_grad(weights: np.ndarray, X, y: np.ndarray, l2_penalty: float = 0.0) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus ``l2_penalty / 2 * ||weights||^2``, and its gradient.

    ``weights`` is ``(K, D)``; ``X`` is ``(n, D)`` dense or sparse; ``y`` holds
    class indices.
    """
    y = np.asarray(y)
    n = X.shape[0]
    if n == 0:
        raise ContractError("empty batch")
    if X.shape[1] != weights.shape[1]:
        raise ContractError(f"feature dimension {X.shape[1]} does not match weights {weights.shape}")
    logits = np.asarray(X @ weights.T)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(n)
    nll = float(np.mean(log_z - shifted[rows, y]))
    resid = np.exp(shifted - log_z[:, None])
    resid[rows, y] -= 1.0
    grad = np.asarray((X.T @ resid).T) / n
    loss = nll + 0.5 * l2_penalty * float(np.sum(weights * weights))
    return loss, grad + l2_penalty * weights


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    valid_accuracy: float | None


def _accuracy(Wt: np.ndarray, X, y: np.ndarray) -> float:
    return float(np.mean(np.argmax(np.asarray(X @ Wt), axis=1) == y))


def _full_loss(Wt: np.ndarray, X, y: np.ndarray, l2: float) -> float:
    logits = np.asarray(X @ Wt)
    m = logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(logits - m).sum(axis=1)) + m[:, 0]
    nll = float(np.mean(log_z - logits[np.arange(len(y)), y]))
    return nll + 0.5 * l2 * float(np.sum(Wt * Wt))


class _LazySGD:
    """Mini-batch SGD whose per-step cost scales with the batch's non-zeros.

    Weights are stored as ``scale * V``; the L2 shrinkage of every step only
    touches ``scale``, and the data gradient only touches the rows of ``V``
    for features present in the batch.
    """

    def __init__(self, Wt: np.ndarray, lr: float, l2: float, adaptive: bool = False):
        self.V = np.array(Wt, dtype=np.float64)
        self.acc = np.zeros_like(self.V) if adaptive else None
        self.scale = 1.0
        self.lr = lr
        self.decay = 1.0 - lr * l2
        if self.decay <= 0:
            raise ConfigError("learning_rate * l2_penalty must be < 1")
        self.k = Wt.shape[1]

    def weights(self) -> np.ndarray:
        return self.V * self.scale

    def epoch(self, X: sp.csr_matrix, y: np.ndarray, bs: int) -> None:
        indptr, indices, data = X.indptr, X.indices, X.data
        n, k, V = X.shape[0], self.k, self.V
        row_of = np.repeat(np.arange(n), np.diff(indptr))
        for start in range(0, n, bs):
            stop = min(start + bs, n)
            lo, hi = indptr[start], indptr[stop]
            idx, dat, rows = indices[lo:hi], data[lo:hi], row_of[lo:hi] - start
            b = stop - start
            contrib = dat[:, None] * V[idx]
            logits = np.empty((b, k))
            for c in range(k):
                logits[:, c] = np.bincount(rows, weights=contrib[:, c], minlength=b)
            logits *= self.scale
            resid = softmax(logits)
            resid[np.arange(b), y[start:stop]] -= 1.0
            cols, inv = np.unique(idx, return_inverse=True)
            grad = np.empty((len(cols), k))
            scaled = dat[:, None] * resid[rows]
            for c in range(k):
                grad[:, c] = np.bincount(inv, weights=scaled[:, c], minlength=len(cols))
            grad /= b
            self.scale *= self.decay
            if self.acc is not None:
                self.acc[cols] += grad * grad
                grad /= np.sqrt(self.acc[cols]) + 1e-10
            V[cols] -= (self.lr / self.scale) * grad
            if self.scale < 1e-6:
                V *= self.scale
                self.scale = 1.0


def train(
    X,
    y,
    space: LabelSpace,
    cfg: TrainConfig = TrainConfig(),
    valid: tuple | None = None,
    init: ClassifierParams | None = None,
    vocab_fingerprint: str | None = None,
    history: list[EpochRecord] | None = None,
) -> ClassifierParams:
    """Mini-batch gradient descent on the penalised mean NLL.

    With ``valid=(X_valid, y_valid)`` the returned weights are those of the
    epoch with the best validation accuracy (earliest on ties), and training
    stops after ``cfg.patience`` epochs without improvement. Without it the
    final weights are returned. Data order is shuffled each epoch from
    ``cfg.seed``; the same inputs always give bitwise-identical weights.
    """
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    if n == 0:
        raise TrainingError("cannot train on an empty dataset")
    if len(y) != n:
        raise ContractError(f"{n} feature rows but {len(y)} labels")
    if y.min() < 0 or y.max() >= space.k:
        raise ContractError(f"labels outside 0..{space.k - 1}")
    X = sp.csr_matrix(X, dtype=np.float64)
    if init is not None:
        if init.weights.shape != (space.k, X.shape[1]):
            raise ContractError(f"init weights {init.weights.shape} do not fit ({space.k}, {X.shape[1]})")
        Wt = np.array(init.weights.T, order="C")
    else:
        Wt = np.zeros((X.shape[1], space.k))
    if valid is not None:
        X_valid, y_valid = valid
        y_valid = np.asarray(y_valid, dtype=np.int64)
        if len(y_valid) == 0:
            valid = None

    lr, l2 = cfg.learning_rate, cfg.l2_penalty
    bs = min(cfg.batch_size, n)
    rng = np.random.default_rng(cfg.seed)
    sgd = _LazySGD(Wt, lr, l2, adaptive=cfg.optimizer == "adagrad")
    best_acc, best_Wt, since_best = -1.0, Wt.copy(), 0

    for epoch in range(1, cfg.max_epochs + 1):
        perm = rng.permutation(n)
        sgd.epoch(X[perm], y[perm], bs)
        Wt = sgd.weights()
        loss = _full_loss(Wt, X, y, l2)
        if not math.isfinite(loss):
            raise TrainingError(f"non-finite loss at epoch {epoch}")
        acc = _accuracy(Wt, X_valid, y_valid) if valid is not None else None
        if history is not None:
            history.append(EpochRecord(epoch, loss, acc))
        if valid is None:
            continue
        if acc > best_acc:
            best_acc, best_Wt, since_best = acc, Wt, 0
        else:
            since_best += 1
            if since_best >= cfg.patience:
                break

    final = best_Wt if valid is not None else Wt
    return ClassifierParams(final.T, space, vocab_fingerprint)


def accuracy_of(params: ClassifierParams, X, y) -> float:
    return _accuracy(params.weights.T, _as_matrix(X, params.dimension), np.asarray(y))
