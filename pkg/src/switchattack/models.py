"""Built-in analytically differentiable classifiers.

Desk-scale stand-ins for trained CNNs: a linear model (logits = W x + b)
and a two-layer tanh MLP.  Both expose exact input gradients of the attack
losses via manual backprop, and serialize to a JSON weight format shared
with the standalone oracle server.
"""
from __future__ import annotations

import json
from typing import Optional

import numpy as np

from .errors import ConfigError, IndexOutOfRange
from .objectives import AttackGoal, LossName, validate_logits

__all__ = [
    "LinearModel",
    "Mlp2Model",
    "make_linear",
    "make_mlp2",
    "builtin_gradient",
    "loss_grad_wrt_logits",
    "save_model",
    "load_model",
    "model_to_dict",
    "model_from_dict",
]


def loss_grad_wrt_logits(logits: np.ndarray, goal: AttackGoal,
                         loss: Optional[LossName] = None) -> np.ndarray:
    """d(attack loss)/d(logits) as a length-K vector.

    For the margin loss the max over j != t is resolved before
    differentiation; ties pick the lowest index j*, which matters for
    surrogate gradients at symmetric points.
    """
    z = validate_logits(logits)
    t = goal.label
    if not 0 <= t < z.size:
        raise IndexOutOfRange(f"class index {t} out of range [0, {z.size})")
    name = loss or goal.default_loss()
    g = np.zeros_like(z)
    if name == "margin":
        masked = z.copy()
        masked[t] = -np.inf
        j_star = int(np.argmax(masked))
        g[j_star] = 1.0
        g[t] -= 1.0
    elif name == "neg-xent":
        m = np.max(z)
        p = np.exp(z - m)
        p /= p.sum()
        g -= p
        g[t] += 1.0
    else:
        raise ValueError(f"unknown loss {name!r}")
    return g


class LinearModel:
    """logits = W x + b."""

    kind = "linear"

    def __init__(self, W, b):
        self.W = np.asarray(W, dtype=np.float64)
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        if self.W.ndim != 2 or self.W.shape[0] != self.b.size:
            raise ConfigError("W must be (K, d) with b of length K")

    @property
    def num_classes(self) -> int:
        return self.W.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W.shape[1]

    def logits(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        return self.W @ x + self.b

    def input_gradient(self, x, dloss_dlogits) -> np.ndarray:
        return (self.W.T @ np.asarray(dloss_dlogits, dtype=np.float64)).astype(np.float32)


class Mlp2Model:
    """logits = W2 tanh(W1 x + b1) + b2."""

    kind = "mlp2"

    def __init__(self, W1, b1, W2, b2):
        self.W1 = np.asarray(W1, dtype=np.float64)
        self.b1 = np.asarray(b1, dtype=np.float64).reshape(-1)
        self.W2 = np.asarray(W2, dtype=np.float64)
        self.b2 = np.asarray(b2, dtype=np.float64).reshape(-1)
        if self.W1.shape[0] != self.b1.size or self.W2.shape[0] != self.b2.size:
            raise ConfigError("bias lengths must match weight rows")
        if self.W2.shape[1] != self.W1.shape[0]:
            raise ConfigError("hidden widths of W1 and W2 disagree")

    @property
    def num_classes(self) -> int:
        return self.W2.shape[0]

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def logits(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        h = np.tanh(self.W1 @ x + self.b1)
        return self.W2 @ h + self.b2

    def input_gradient(self, x, dloss_dlogits) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        h = np.tanh(self.W1 @ x + self.b1)
        dz2 = np.asarray(dloss_dlogits, dtype=np.float64)
        dh = self.W2.T @ dz2
        dz1 = (1.0 - h * h) * dh
        return (self.W1.T @ dz1).astype(np.float32)


def builtin_gradient(model, x, goal: AttackGoal,
                     loss: Optional[LossName] = None) -> np.ndarray:
    """Exact analytic gradient of the attack loss w.r.t. the input image."""
    z = model.logits(x)
    return model.input_gradient(x, loss_grad_wrt_logits(z, goal, loss))


def make_linear(d: int, k: int, rng: np.random.Generator) -> LinearModel:
    """Seeded normal init scaled by 1/sqrt(fan-in)."""
    W = rng.standard_normal((k, d)) / np.sqrt(d)
    b = rng.standard_normal(k) * 0.01
    return LinearModel(W, b)


def make_mlp2(d: int, hidden: int, k: int, rng: np.random.Generator) -> Mlp2Model:
    W1 = rng.standard_normal((hidden, d)) / np.sqrt(d)
    b1 = np.zeros(hidden)
    W2 = rng.standard_normal((k, hidden)) / np.sqrt(hidden)
    b2 = np.zeros(k)
    return Mlp2Model(W1, b1, W2, b2)


def model_to_dict(model) -> dict:
    if isinstance(model, LinearModel):
        return {"kind": "linear", "W": model.W.tolist(), "b": model.b.tolist()}
    if isinstance(model, Mlp2Model):
        return {
            "kind": "mlp2",
            "activation": "tanh",
            "W1": model.W1.tolist(),
            "b1": model.b1.tolist(),
            "W2": model.W2.tolist(),
            "b2": model.b2.tolist(),
        }
    raise ConfigError(f"cannot serialize model of type {type(model).__name__}")


def model_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "linear":
        return LinearModel(d["W"], d["b"])
    if kind == "mlp2":
        return Mlp2Model(d["W1"], d["b1"], d["W2"], d["b2"])
    raise ConfigError(f"unknown model kind {kind!r}")


def save_model(model, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
