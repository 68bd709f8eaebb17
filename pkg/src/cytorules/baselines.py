"""Reference classifiers for the ablation: LR, linear SVM, tiny MLP.

All three train on z-scored features (statistics fit on the training split
only) with plain gradient descent, deterministic for a fixed seed. The MLP
is a single 8-unit ReLU hidden layer with a sigmoid output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLabels, NotFitted

HIDDEN_UNITS = 8


@dataclass
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        x = np.asarray(x, dtype=np.float64)
        std = x.std(axis=0)
        return cls(mean=x.mean(axis=0), std=np.where(std > 0, std, 1.0))

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std


@dataclass
class BaselineConfig:
    epochs: int = 500
    learning_rate: float = 0.1
    lr_decay: float = 0.01  # step t uses lr / (1 + decay * t)
    l2: float = 1e-3
    svm_c: float = 1.0
    grad_tol: float = 1e-6
    batch_size: int = 32  # MLP only
    init_scale: float | None = None  # None = Glorot-style, 0 = zero init
    seed: int = 0


@dataclass
class LinearModel:
    weights: np.ndarray
    bias: float
    kind: str  # "logistic" or "hinge"
    scaler: Standardizer | None = None

    def score(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.scaler is not None:
            x = self.scaler.transform(x)
        return x @ self.weights + self.bias

    def to_json(self) -> dict:
        doc = {"kind": self.kind, "weights": self.weights.tolist(), "bias": self.bias}
        if self.scaler is not None:
            doc["scaler"] = {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "LinearModel":
        scaler = None
        if "scaler" in doc:
            scaler = Standardizer(
                mean=np.asarray(doc["scaler"]["mean"]), std=np.asarray(doc["scaler"]["std"])
            )
        return cls(
            weights=np.asarray(doc["weights"], dtype=np.float64),
            bias=float(doc["bias"]),
            kind=doc["kind"],
            scaler=scaler,
        )


@dataclass
class MlpModel:
    w1: np.ndarray  # 8 x D
    b1: np.ndarray  # 8
    w2: np.ndarray  # 8
    b2: float
    scaler: Standardizer | None = None

    def probability(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            x = x[None, :]
        if self.scaler is not None:
            x = self.scaler.transform(x)
        hidden = np.maximum(x @ self.w1.T + self.b1, 0.0)
        return _sigmoid(hidden @ self.w2 + self.b2)

    def to_json(self) -> dict:
        doc = {
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2,
        }
        if self.scaler is not None:
            doc["scaler"] = {"mean": self.scaler.mean.tolist(), "std": self.scaler.std.tolist()}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "MlpModel":
        scaler = None
        if "scaler" in doc:
            scaler = Standardizer(
                mean=np.asarray(doc["scaler"]["mean"]), std=np.asarray(doc["scaler"]["std"])
            )
        return cls(
            w1=np.asarray(doc["w1"], dtype=np.float64),
            b1=np.asarray(doc["b1"], dtype=np.float64),
            w2=np.asarray(doc["w2"], dtype=np.float64),
            b2=float(doc["b2"]),
            scaler=scaler,
        )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def _check_labels(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    if np.all(y == y[0]):
        raise DegenerateLabels("training labels contain a single class")
    return y


def logistic_loss_grad(weights, bias, x, y, l2):
    """Mean log loss + L2 on weights; returns (loss, grad_w, grad_b)."""
    z = x @ weights + bias
    p = _sigmoid(z)
    eps = 1e-12
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    loss += 0.5 * l2 * float(weights @ weights)
    err = (p - y) / x.shape[0]
    return loss, x.T @ err + l2 * weights, float(err.sum())


def hinge_loss_grad(weights, bias, x, y_pm, c):
    """0.5*||w||^2 + C * mean hinge; y_pm in {-1, +1}."""
    z = x @ weights + bias
    margin = 1.0 - y_pm * z
    active = margin > 0
    loss = 0.5 * float(weights @ weights) + c * float(np.mean(np.maximum(margin, 0.0)))
    coeff = np.where(active, -y_pm, 0.0) / x.shape[0]
    return loss, weights + c * (x.T @ coeff), c * float(coeff.sum())


def train_logistic(train_x, train_y, cfg: BaselineConfig | None = None, standardize=True):
    """L2-regularized logistic regression by full-batch gradient descent."""
    cfg = cfg or BaselineConfig()
    y = _check_labels(train_y)
    scaler = Standardizer.fit(train_x) if standardize else None
    x = scaler.transform(train_x) if scaler else np.asarray(train_x, dtype=np.float64)
    weights = np.zeros(x.shape[1])
    bias = 0.0
    for step in range(cfg.epochs):
        _, gw, gb = logistic_loss_grad(weights, bias, x, y, cfg.l2)
        if np.sqrt(float(gw @ gw) + gb * gb) < cfg.grad_tol:
            break
        lr = cfg.learning_rate / (1.0 + cfg.lr_decay * step)
        weights -= lr * gw
        bias -= lr * gb
    return LinearModel(weights=weights, bias=bias, kind="logistic", scaler=scaler)


def train_linear_svm(train_x, train_y, cfg: BaselineConfig | None = None, standardize=True):
    """Linear SVM by subgradient descent on the primal hinge objective."""
    cfg = cfg or BaselineConfig()
    y = _check_labels(train_y)
    y_pm = np.where(y > 0.5, 1.0, -1.0)
    scaler = Standardizer.fit(train_x) if standardize else None
    x = scaler.transform(train_x) if scaler else np.asarray(train_x, dtype=np.float64)
    weights = np.zeros(x.shape[1])
    bias = 0.0
    for step in range(cfg.epochs):
        _, gw, gb = hinge_loss_grad(weights, bias, x, y_pm, cfg.svm_c)
        if np.sqrt(float(gw @ gw) + gb * gb) < cfg.grad_tol:
            break
        lr = cfg.learning_rate / (1.0 + cfg.lr_decay * step)
        weights -= lr * gw
        bias -= lr * gb
    return LinearModel(weights=weights, bias=bias, kind="hinge", scaler=scaler)


def mlp_loss_grads(params, x, y):
    """Mean log loss of the 8-unit MLP; returns (loss, grads dict)."""
    w1, b1, w2, b2 = params["w1"], params["b1"], params["w2"], params["b2"]
    pre = x @ w1.T + b1
    hidden = np.maximum(pre, 0.0)
    z = hidden @ w2 + b2
    p = _sigmoid(z)
    eps = 1e-12
    loss = float(-np.mean(y * np.log(p + eps) + (1 - y) * np.log(1 - p + eps)))
    dz = (p - y) / x.shape[0]
    dw2 = hidden.T @ dz
    db2 = float(dz.sum())
    dhidden = np.outer(dz, w2) * (pre > 0)
    dw1 = dhidden.T @ x
    db1 = dhidden.sum(axis=0)
    return loss, {"w1": dw1, "b1": db1, "w2": dw2, "b2": db2}


def train_mlp(train_x, train_y, cfg: BaselineConfig | None = None, standardize=True):
    """fc(8) + ReLU + fc(1) with sigmoid output, minibatch SGD, seeded init."""
    cfg = cfg or BaselineConfig()
    y = _check_labels(train_y)
    scaler = Standardizer.fit(train_x) if standardize else None
    x = scaler.transform(train_x) if scaler else np.asarray(train_x, dtype=np.float64)
    n, dim = x.shape
    rng = np.random.default_rng(cfg.seed)
    scale1 = cfg.init_scale if cfg.init_scale is not None else np.sqrt(2.0 / dim)
    scale2 = cfg.init_scale if cfg.init_scale is not None else np.sqrt(2.0 / HIDDEN_UNITS)
    params = {
        "w1": rng.normal(0.0, 1.0, size=(HIDDEN_UNITS, dim)) * scale1,
        "b1": np.zeros(HIDDEN_UNITS),
        "w2": rng.normal(0.0, 1.0, size=HIDDEN_UNITS) * scale2,
        "b2": 0.0,
    }
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        lr = cfg.learning_rate / (1.0 + cfg.lr_decay * epoch)
        for start in range(0, n, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            _, grads = mlp_loss_grads(params, x[batch], y[batch])
            params["w1"] = params["w1"] - lr * grads["w1"]
            params["b1"] = params["b1"] - lr * grads["b1"]
            params["w2"] = params["w2"] - lr * grads["w2"]
            params["b2"] = params["b2"] - lr * grads["b2"]
    return MlpModel(
        w1=params["w1"], b1=params["b1"], w2=params["w2"], b2=float(params["b2"]), scaler=scaler
    )


def predict_baseline(model, x) -> np.ndarray:
    """Binary predictions; scores at the threshold count as positive."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if isinstance(model, MlpModel):
        out = (model.probability(x) >= 0.5).astype(int)
    elif isinstance(model, LinearModel):
        out = (model.score(x) >= 0.0).astype(int)
    else:
        raise NotFitted(f"unknown model type {type(model)!r}")
    return out[0] if single else out


def save_baseline(model, path) -> None:
    doc = model.to_json()
    doc["model_type"] = "mlp" if isinstance(model, MlpModel) else "linear"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def load_baseline(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("model_type") == "mlp":
        return MlpModel.from_json(doc)
    return LinearModel.from_json(doc)
