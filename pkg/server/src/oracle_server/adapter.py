"""Model adapters: the pluggable bridge between the HTTP layer and a
classifier implementation.

An adapter provides `predict(image) -> logits list`, `num_classes`,
`shape`, `name`, optionally `gradient(image, mode, t, loss)` for the
diagnostic/surrogate channel, and a `reentrant` flag (False means the
server serializes request handling).

The bundled reference adapter evaluates the engine's JSON weights format
(linear or two-layer tanh MLP) in plain numpy, so the service has no
dependency on the attack engine or any ML framework.
"""
from __future__ import annotations

import importlib
import json
import math
from typing import List, Optional, Sequence

import numpy as np

__all__ = ["ParseError", "ReferenceAdapter", "load_adapter"]


class ParseError(Exception):
    """Weights file missing, unreadable, or not in the expected format."""


def _matrix(raw, what: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{what} is not numeric") from exc
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{what} contains non-finite values")
    return arr


class ReferenceAdapter:
    """Pure-arithmetic forward/backward for the shared JSON weights format.

    linear:  logits = W x + b
    mlp2:    logits = W2 tanh(W1 x + b1) + b2
    """

    reentrant = True  # stateless numpy arithmetic

    def __init__(self, weights_path: str):
        try:
            with open(weights_path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, ValueError) as exc:
            raise ParseError(f"cannot read weights {weights_path}: {exc}") from exc
        kind = raw.get("kind")
        if kind == "linear":
            self.W = _matrix(raw.get("W"), "W")
            self.b = _matrix(raw.get("b"), "b")
            if self.W.ndim != 2 or self.b.shape != (self.W.shape[0],):
                raise ParseError("inconsistent linear weight shapes")
            self.kind = "linear"
            self.num_classes, dim = self.W.shape
            self.name = "linear-ref"
        elif kind == "mlp2":
            if raw.get("activation", "tanh") != "tanh":
                raise ParseError(f"unsupported activation {raw.get('activation')!r}")
            self.W1 = _matrix(raw.get("W1"), "W1")
            self.b1 = _matrix(raw.get("b1"), "b1")
            self.W2 = _matrix(raw.get("W2"), "W2")
            self.b2 = _matrix(raw.get("b2"), "b2")
            hidden, dim = self.W1.shape
            if (self.b1.shape != (hidden,) or self.W2.shape[1] != hidden
                    or self.b2.shape != (self.W2.shape[0],)):
                raise ParseError("inconsistent mlp2 weight shapes")
            self.kind = "mlp2"
            self.num_classes = self.W2.shape[0]
            self.name = "mlp2-ref"
        else:
            raise ParseError(f"unknown model kind {kind!r}")
        if self.num_classes < 2:
            raise ParseError("model has fewer than 2 classes")
        self.shape = (dim,)

    # -- forward ---------------------------------------------------------

    def _logits(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return self.W @ x + self.b
        h = np.tanh(self.W1 @ x + self.b1)
        return self.W2 @ h + self.b2

    def predict(self, image: Sequence[float]) -> List[float]:
        x = np.asarray(image, dtype=np.float64)
        return [float(v) for v in self._logits(x)]

    # -- gradient of the attack loss w.r.t. the input --------------------

    def _loss_grad_logits(self, z: np.ndarray, t: int, loss: str) -> np.ndarray:
        g = np.zeros_like(z)
        if loss == "margin":
            # max over j != t resolved before differentiation; argmax
            # ties break to the lowest index
            masked = z.copy()
            masked[t] = -math.inf
            g[int(np.argmax(masked))] = 1.0
            g[t] -= 1.0
        elif loss == "neg-xent":
            p = np.exp(z - z.max())
            g -= p / p.sum()
            g[t] += 1.0
        else:
            raise ValueError(f"unknown loss {loss!r}")
        return g

    def gradient(self, image: Sequence[float], mode: str, t: int,
                 loss: Optional[str] = None) -> List[float]:
        if mode not in ("untargeted", "targeted"):
            raise ValueError(f"unknown mode {mode!r}")
        if not 0 <= t < self.num_classes:
            raise ValueError(f"class index {t} out of range")
        loss = loss or ("neg-xent" if mode == "targeted" else "margin")
        x = np.asarray(image, dtype=np.float64)
        if self.kind == "linear":
            z = self.W @ x + self.b
            gx = self.W.T @ self._loss_grad_logits(z, t, loss)
        else:
            z1 = self.W1 @ x + self.b1
            h = np.tanh(z1)
            z = self.W2 @ h + self.b2
            gz = self._loss_grad_logits(z, t, loss)
            gx = self.W1.T @ ((1.0 - h * h) * (self.W2.T @ gz))
        return [float(v) for v in gx]


def load_adapter(spec: str, weights_path: Optional[str]):
    """Build an adapter from a CLI spec.

    "reference" loads the bundled numpy adapter; anything else is treated
    as a module path whose `make_adapter(weights_path)` factory is called,
    so framework-backed adapters can plug in without being dependencies.
    """
    if spec == "reference":
        if weights_path is None:
            raise ParseError("the reference adapter requires --weights")
        return ReferenceAdapter(weights_path)
    try:
        module = importlib.import_module(spec)
    except ImportError as exc:
        raise ParseError(f"cannot import adapter module {spec!r}: {exc}") from exc
    factory = getattr(module, "make_adapter", None)
    if factory is None:
        raise ParseError(f"adapter module {spec!r} has no make_adapter()")
    return factory(weights_path)
