"""A small from-scratch probe classifier for desk-scale experiments.

The probe is a linear softmax classifier (optionally with one ReLU hidden
layer) trained by plain mini-batch SGD on flattened, bilinearly
downsampled images. It is deliberately simple: every gradient is written
out by hand and checked against finite differences, and training is
deterministic given the seed.

The estimator follows scikit-learn conventions (``fit`` / ``predict`` /
``get_params``) so it composes with the usual tooling; validation data
for early stopping is passed as fit parameters.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .errors import ConfigurationError, TrainingError
from .render import load_png
from .resample import bilinear_resize
from .seeding import as_rng
from .validation import check_labels, check_matrix

CHECKPOINT_MAGIC = b"FBPROBE1"
_ARCH_CODES = {"linear": 0, "mlp": 1}


@dataclass(frozen=True)
class ProbeConfig:
    """Hyperparameters for a probe run; all must be positive."""

    architecture: str = "linear"
    hidden: int = 32
    downsample: int = 32
    lr: float = 1.0
    batch_size: int = 128
    epochs: int = 150
    patience: int = 25
    seed: int = 0

    def __post_init__(self):
        if self.architecture not in _ARCH_CODES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")
        for name in ("hidden", "downsample", "batch_size", "epochs", "patience"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.lr < 0:
            raise ConfigurationError("lr must be nonnegative")

    def make_estimator(self) -> "ProbeClassifier":
        return ProbeClassifier(
            architecture=self.architecture,
            hidden=self.hidden,
            lr=self.lr,
            batch_size=self.batch_size,
            epochs=self.epochs,
            patience=self.patience,
            seed=self.seed,
        )


def _softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _loss_and_grads(params, arch, X, y):
    """Mean softmax cross-entropy and analytic gradients for all params."""
    n = X.shape[0]
    if arch == "linear":
        scores = X @ params["W"] + params["b"]
    else:
        z1 = X @ params["W1"] + params["b1"]
        h = np.maximum(z1, 0.0)
        scores = h @ params["W2"] + params["b2"]
    p = _softmax(scores)
    loss = -np.log(np.clip(p[np.arange(n), y], 1e-300, None)).mean()
    dscores = p.copy()
    dscores[np.arange(n), y] -= 1.0
    dscores /= n
    if arch == "linear":
        grads = {"W": X.T @ dscores, "b": dscores.sum(axis=0)}
    else:
        grads = {"W2": h.T @ dscores, "b2": dscores.sum(axis=0)}
        dh = dscores @ params["W2"].T
        dz1 = dh * (z1 > 0)
        grads["W1"] = X.T @ dz1
        grads["b1"] = dz1.sum(axis=0)
    return loss, grads


def _forward_scores(params, arch, X):
    if arch == "linear":
        return X @ params["W"] + params["b"]
    h = np.maximum(X @ params["W1"] + params["b1"], 0.0)
    return h @ params["W2"] + params["b2"]


def _mean_loss(params, arch, X, y):
    p = _softmax(_forward_scores(params, arch, X))
    return -np.log(np.clip(p[np.arange(X.shape[0]), y], 1e-300, None)).mean()


class ProbeClassifier(BaseEstimator, ClassifierMixin):
    """Softmax classifier trained with mini-batch SGD.

    Parameters mirror :class:`ProbeConfig`. After ``fit`` the estimator
    holds the checkpoint with the lowest validation loss (or the final
    parameters when no validation set was given) plus a per-epoch
    ``history_`` of train/val loss and accuracy.
    """

    def __init__(
        self,
        architecture="linear",
        hidden=32,
        lr=1.0,
        batch_size=128,
        epochs=150,
        patience=25,
        seed=0,
    ):
        self.architecture = architecture
        self.hidden = hidden
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.patience = patience
        self.seed = seed

    # -- parameter handling ---------------------------------------------------

    def _init_params(self, n_features, n_classes, rng):
        if self.architecture == "linear":
            return {
                "W": np.zeros((n_features, n_classes)),
                "b": np.zeros(n_classes),
            }
        scale = 1.0 / np.sqrt(n_features)
        return {
            "W1": rng.normal(0.0, scale, size=(n_features, self.hidden)),
            "b1": np.zeros(self.hidden),
            "W2": np.zeros((self.hidden, n_classes)),
            "b2": np.zeros(n_classes),
        }

    # -- estimator API ----------------------------------------------------------

    def fit(self, X, y, X_val=None, y_val=None):
        if self.architecture not in _ARCH_CODES:
            raise ConfigurationError(f"unknown architecture {self.architecture!r}")
        X = check_matrix(X)
        y = check_labels(y, X.shape[0])
        n_classes = int(y.max()) + 1
        if n_classes < 2:
            raise ValueError("need at least two classes")
        has_val = X_val is not None
        if has_val:
            X_val = check_matrix(X_val, "X_val")
            y_val = check_labels(y_val, X_val.shape[0], "y_val")

        rng = as_rng(int(self.seed))
        params = self._init_params(X.shape[1], n_classes, rng)
        history = []
        best = {"loss": np.inf, "params": _copy_params(params), "epoch": 0}
        stale = 0

        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(X.shape[0])
            for start in range(0, X.shape[0], self.batch_size):
                idx = order[start : start + self.batch_size]
                loss, grads = _loss_and_grads(params, self.architecture, X[idx], y[idx])
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"training loss diverged in epoch {epoch}",
                        last_stable_epoch=epoch - 1,
                    )
                for key, grad in grads.items():
                    params[key] -= self.lr * grad

            if not all(np.all(np.isfinite(p)) for p in params.values()):
                raise TrainingError(
                    f"parameters became non-finite in epoch {epoch}",
                    last_stable_epoch=epoch - 1,
                )
            entry = {
                "epoch": epoch,
                "train_loss": _mean_loss(params, self.architecture, X, y),
                "train_acc": float(
                    (np.argmax(_forward_scores(params, self.architecture, X), axis=1) == y).mean()
                ),
            }
            if not np.isfinite(entry["train_loss"]):
                raise TrainingError(
                    f"training loss diverged in epoch {epoch}",
                    last_stable_epoch=epoch - 1,
                )
            if has_val:
                entry["val_loss"] = _mean_loss(params, self.architecture, X_val, y_val)
                entry["val_acc"] = float(
                    (np.argmax(_forward_scores(params, self.architecture, X_val), axis=1) == y_val).mean()
                )
                if entry["val_loss"] < best["loss"]:
                    best = {
                        "loss": entry["val_loss"],
                        "params": _copy_params(params),
                        "epoch": epoch,
                    }
                    stale = 0
                else:
                    stale += 1
            history.append(entry)
            if has_val and stale > self.patience:
                break

        self.params_ = best["params"] if has_val else params
        self.best_epoch_ = best["epoch"] if has_val else len(history)
        self.n_features_in_ = X.shape[1]
        self.n_classes_ = n_classes
        self.history_ = history
        return self

    def decision_function(self, X):
        self._check_fitted()
        X = check_matrix(X)
        return _forward_scores(self.params_, self.architecture, X)

    def predict(self, X):
        # np.argmax breaks ties toward the lowest class index.
        return np.argmax(self.decision_function(X), axis=1)

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise ConfigurationError("probe is not fitted")

    # -- persistence ------------------------------------------------------------

    def save(self, path):
        """Write the fitted parameters in the flat binary checkpoint format."""
        self._check_fitted()
        arch = _ARCH_CODES[self.architecture]
        hidden = self.hidden if self.architecture == "mlp" else 0
        with open(path, "wb") as fh:
            fh.write(CHECKPOINT_MAGIC)
            fh.write(
                struct.pack(
                    "<IIII", arch, self.n_features_in_, self.n_classes_, hidden
                )
            )
            for key in _param_order(self.architecture):
                arr = np.ascontiguousarray(self.params_[key], dtype="<f8")
                fh.write(arr.tobytes())

    @classmethod
    def load(cls, path) -> "ProbeClassifier":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != CHECKPOINT_MAGIC:
                raise ConfigurationError(f"{path} is not a probe checkpoint")
            arch_code, n_features, n_classes, hidden = struct.unpack("<IIII", fh.read(16))
            arch = {v: k for k, v in _ARCH_CODES.items()}.get(arch_code)
            if arch is None:
                raise ConfigurationError(f"unknown architecture code {arch_code}")
            shapes = _param_shapes(arch, n_features, n_classes, hidden)
            params = {}
            for key in _param_order(arch):
                shape = shapes[key]
                count = int(np.prod(shape))
                data = fh.read(8 * count)
                if len(data) != 8 * count:
                    raise ConfigurationError(f"truncated checkpoint {path}")
                params[key] = np.frombuffer(data, dtype="<f8").reshape(shape).copy()
        est = cls(architecture=arch, hidden=hidden or 32)
        est.params_ = params
        est.n_features_in_ = n_features
        est.n_classes_ = n_classes
        est.history_ = []
        est.best_epoch_ = 0
        return est


def _param_order(arch):
    return ("W", "b") if arch == "linear" else ("W1", "b1", "W2", "b2")


def _param_shapes(arch, n_features, n_classes, hidden):
    if arch == "linear":
        return {"W": (n_features, n_classes), "b": (n_classes,)}
    return {
        "W1": (n_features, hidden),
        "b1": (hidden,),
        "W2": (hidden, n_classes),
        "b2": (n_classes,),
    }


def _copy_params(params):
    return {k: v.copy() for k, v in params.items()}


# ---------------------------------------------------------------------------
# Gradient checking


def grad_check(
    model: ProbeClassifier,
    X,
    y,
    n_coordinates: int = 100,
    epsilon: float = 1e-4,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks a random subset of parameter coordinates on a small batch
    (at most 8 rows, at most 16x16x3 features, for speed). For the MLP the
    check runs on a copy whose hidden biases are nudged away from ReLU
    kinks, where the loss is not differentiable and finite differences
    are meaningless.
    """
    model._check_fitted()
    X = check_matrix(X)
    y = check_labels(y, X.shape[0])
    if X.shape[0] > 8:
        raise ConfigurationError("grad_check batches are limited to 8 rows")
    if X.shape[1] > 16 * 16 * 3:
        raise ConfigurationError("grad_check inputs are limited to 768 features")

    arch = model.architecture
    params = _copy_params(model.params_)
    if arch == "mlp":
        _nudge_relu_kinks(params, X, margin=10 * epsilon)

    _, analytic = _loss_and_grads(params, arch, X, y)

    rng = as_rng(seed)
    keys = _param_order(arch)
    sizes = [params[k].size for k in keys]
    total = int(np.sum(sizes))
    coords = rng.choice(total, size=min(n_coordinates, total), replace=False)

    max_rel = 0.0
    for flat_index in coords:
        key, offset = _locate(keys, sizes, int(flat_index))
        flat = params[key].reshape(-1)
        original = flat[offset]
        flat[offset] = original + epsilon
        loss_plus = _mean_loss(params, arch, X, y)
        flat[offset] = original - epsilon
        loss_minus = _mean_loss(params, arch, X, y)
        flat[offset] = original
        fd = (loss_plus - loss_minus) / (2 * epsilon)
        an = analytic[key].reshape(-1)[offset]
        rel = abs(an - fd) / max(abs(an), abs(fd), 1e-6)
        max_rel = max(max_rel, rel)
    return max_rel


def _locate(keys, sizes, flat_index):
    for key, size in zip(keys, sizes):
        if flat_index < size:
            return key, flat_index
        flat_index -= size
    raise IndexError(flat_index)


def _nudge_relu_kinks(params, X, margin):
    """Shift hidden biases so no pre-activation sits within ``margin`` of 0."""
    z1 = X @ params["W1"] + params["b1"]
    for j in range(z1.shape[1]):
        near = np.abs(z1[:, j]) < margin
        if near.any():
            params["b1"][j] += 2 * margin
            z1[:, j] += 2 * margin


# ---------------------------------------------------------------------------
# Manifest plumbing


def load_split_arrays(manifest, manifest_dir, split: str, side: int = 32):
    """Decode a manifest split into (X, y, ids) probe arrays.

    Images are bilinearly downsampled to ``side`` x ``side``, flattened,
    and centered by subtracting the background grey 0.5 (zero-mean
    background conditions plain SGD far better than raw [0, 1] pixels).
    """
    manifest_dir = Path(manifest_dir)
    records = manifest.records_for(split)
    if not records:
        raise ConfigurationError(f"manifest has no {split!r} records")
    X = np.empty((len(records), side * side * 3), dtype=np.float64)
    y = np.empty(len(records), dtype=np.intp)
    ids = []
    for k, rec in enumerate(records):
        img = load_png(manifest_dir / rec.file)
        X[k] = bilinear_resize(img, (side, side)).ravel() - 0.5
        y[k] = rec.target
        ids.append(rec.id)
    return X, y, ids


def train_probe(config: ProbeConfig, manifest, manifest_dir) -> ProbeClassifier:
    """Train the probe on a manifest's train split with early stopping on
    its validation split."""
    X, y, _ = load_split_arrays(manifest, manifest_dir, "train", config.downsample)
    X_val, y_val, _ = load_split_arrays(manifest, manifest_dir, "val", config.downsample)
    return config.make_estimator().fit(X, y, X_val=X_val, y_val=y_val)


def predict_split(model: ProbeClassifier, manifest, manifest_dir, split: str = "test", side: int = 32):
    """Predict one split; returns (ids, labels) ready for a prediction CSV."""
    X, _, ids = load_split_arrays(manifest, manifest_dir, split, side)
    return ids, model.predict(X)
