"""Target-model and surrogate-gradient abstractions plus query accounting.

The QueryLedger is the central cost metric: exactly one increment per
target-model logits evaluation, checked against the budget before every
query.  Surrogate gradients never touch the ledger, and the diagnostic
`true_gradient` channel is likewise uncounted and never consulted by the
attack logic.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Protocol, runtime_checkable

import numpy as np
import requests

from .errors import (
    BudgetExhausted,
    DegenerateDimension,
    MalformedResponse,
    NonFinite,
    OracleFailure,
    ShapeMismatch,
)
from .models import builtin_gradient
from .objectives import AttackGoal, LossName, attack_loss, is_success
from .tensors import cosine_similarity, l2_norm

__all__ = [
    "QueryLedger",
    "TargetOracle",
    "SurrogateProvider",
    "BuiltinOracle",
    "BuiltinSurrogate",
    "NegatedSurrogate",
    "RandomSurrogate",
    "ControlledCosineSurrogate",
    "RemoteOracle",
    "RemoteSurrogate",
    "query_loss",
    "random_surrogate",
    "controlled_cosine_surrogate",
]


@dataclass
class QueryLedger:
    """Monotone per-image counter of target-oracle queries."""

    budget: int = 10000
    count: int = 0

    def __post_init__(self):
        if self.budget < 1:
            raise ValueError("budget must be >= 1")

    @property
    def remaining(self) -> int:
        return self.budget - self.count

    def charge(self, n: int = 1):
        if self.count + n > self.budget:
            raise BudgetExhausted(
                f"{self.count} + {n} queries would exceed budget {self.budget}"
            )
        self.count += n


@runtime_checkable
class TargetOracle(Protocol):
    """Black-box logits access to the model under attack."""

    num_classes: int

    def query(self, image: np.ndarray) -> np.ndarray:
        """Logits for one image. Deterministic; does not count queries
        itself (accounting lives in `query_loss`)."""
        ...


class SurrogateProvider(Protocol):
    """Raw gradient of the attack loss of a locally available substitute
    model; never consumes target queries."""

    def gradient(self, image: np.ndarray, goal: AttackGoal) -> np.ndarray: ...


def query_loss(oracle, ledger: QueryLedger, image: np.ndarray, goal: AttackGoal,
               loss: Optional[LossName] = None):
    """One counted target query: returns (loss, logits, success).

    Raises BudgetExhausted (ledger untouched) when the budget is spent and
    OracleFailure for remote I/O errors or non-finite logits.
    """
    if ledger.remaining < 1:
        raise BudgetExhausted(f"budget {ledger.budget} exhausted")
    logits = oracle.query(image)
    ledger.charge(1)
    try:
        value = attack_loss(logits, goal, loss)
        ok = is_success(logits, goal)
    except NonFinite as exc:
        raise OracleFailure(str(exc)) from exc
    return value, logits, ok


class BuiltinOracle:
    """Wraps a built-in model as a target oracle with a diagnostic
    true-gradient channel."""

    def __init__(self, model):
        self.model = model
        self.num_classes = model.num_classes
        self.input_dim = model.input_dim

    def query(self, image: np.ndarray) -> np.ndarray:
        return self.model.logits(image)

    def true_gradient(self, image: np.ndarray, goal: AttackGoal,
                      loss: Optional[LossName] = None) -> np.ndarray:
        return builtin_gradient(self.model, image, goal, loss)

    def clone(self):
        return self  # stateless, safe to share


class BuiltinSurrogate:
    """Exact attack-loss gradient of a built-in substitute model."""

    def __init__(self, model, loss: Optional[LossName] = None):
        self.model = model
        self.loss = loss

    def gradient(self, image: np.ndarray, goal: AttackGoal) -> np.ndarray:
        return builtin_gradient(self.model, image, goal, self.loss)


class NegatedSurrogate:
    """Flips the sign of another surrogate's gradient (test fixture for
    the mirror property)."""

    def __init__(self, inner):
        self.inner = inner

    def gradient(self, image, goal):
        return -self.inner.gradient(image, goal)


def random_surrogate(d: int, rng: np.random.Generator) -> np.ndarray:
    """d independent standard-normal draws."""
    if d < 1:
        raise DegenerateDimension("need d >= 1")
    return rng.standard_normal(d).astype(np.float32)


def controlled_cosine_surrogate(true_grad, target_cos: float,
                                rng: np.random.Generator) -> np.ndarray:
    """Synthetic surrogate gradient with a prescribed cosine similarity to
    the true gradient.

    Built as cos * u + sqrt(1 - cos^2) * n where u is the true-gradient
    direction and n is a random unit vector Gram-Schmidt-orthogonalized
    against u.
    """
    g = np.asarray(true_grad, dtype=np.float64).reshape(-1)
    if g.size < 2:
        raise DegenerateDimension("need d >= 2 for a controlled cosine")
    if not 0.0 < target_cos <= 1.0:
        raise ValueError("target cosine must be in (0, 1]")
    n = l2_norm(g)
    if n == 0.0:
        raise ValueError("true gradient has zero norm")
    u = g / n
    if target_cos == 1.0:
        return u.astype(np.float32)
    while True:
        noise = rng.standard_normal(g.size)
        noise -= np.dot(noise, u) * u
        nn = l2_norm(noise)
        if nn > 1e-12:
            break
    noise /= nn
    out = target_cos * u + np.sqrt(1.0 - target_cos**2) * noise
    return out.astype(np.float32)


class RandomSurrogate:
    """Fresh random normal direction each call (the paper's 'Random' row)."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng

    def gradient(self, image, goal):
        return random_surrogate(np.asarray(image).size, self.rng)


class ControlledCosineSurrogate:
    """Surrogate whose gradient keeps a fixed cosine to the target's true
    gradient; uses the uncounted diagnostic channel only."""

    def __init__(self, target_oracle, target_cos: float, rng: np.random.Generator):
        if not hasattr(target_oracle, "true_gradient"):
            raise ValueError("target oracle exposes no true-gradient channel")
        self.target = target_oracle
        self.target_cos = float(target_cos)
        self.rng = rng

    def gradient(self, image, goal):
        tg = self.target.true_gradient(image, goal)
        if l2_norm(tg) == 0.0:
            return np.zeros(np.asarray(image).size, dtype=np.float32)
        return controlled_cosine_surrogate(tg, self.target_cos, self.rng)


class RemoteOracle:
    """HTTP client for the oracle-server wire protocol.

    One instance per worker; `clone()` opens a fresh connection.  All
    transport and format errors surface as OracleFailure so the caller can
    abort the current image without corrupting the ledger.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.session = requests.Session()
        meta = self._get("/meta")
        try:
            self.num_classes = int(meta["num_classes"])
            self.shape = tuple(int(s) for s in meta["shape"])
            self.name = str(meta.get("name", ""))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponse(f"bad /meta response: {meta!r}") from exc
        self.input_dim = int(np.prod(self.shape))

    def clone(self):
        return RemoteOracle(self.endpoint, self.timeout)

    def _get(self, path):
        try:
            resp = self.session.get(self.endpoint + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise OracleFailure(f"GET {path} failed: {exc}") from exc
        return self._decode(resp, path)

    def _post(self, path, payload):
        try:
            resp = self.session.post(self.endpoint + path, json=payload,
                                     timeout=self.timeout)
        except requests.RequestException as exc:
            raise OracleFailure(f"POST {path} failed: {exc}") from exc
        return self._decode(resp, path)

    @staticmethod
    def _decode(resp, path):
        try:
            body = resp.json()
        except ValueError as exc:
            raise MalformedResponse(f"{path}: non-JSON response") from exc
        if resp.status_code != 200:
            raise OracleFailure(
                f"{path}: HTTP {resp.status_code}: {body.get('error', body)}"
            )
        return body

    def query(self, image: np.ndarray) -> np.ndarray:
        image = np.asarray(image, dtype=np.float32).reshape(-1)
        if image.size != self.input_dim:
            raise ShapeMismatch(
                f"image dim {image.size} != server dim {self.input_dim}"
            )
        body = self._post("/logits", {
            "image": [float(v) for v in image],
            "shape": list(self.shape),
        })
        logits = body.get("logits")
        if not isinstance(logits, list) or len(logits) != self.num_classes:
            raise MalformedResponse(f"bad logits payload: {body!r}")
        z = np.asarray(logits, dtype=np.float64)
        if not np.all(np.isfinite(z)):
            raise OracleFailure("server returned non-finite logits")
        return z

    def true_gradient(self, image: np.ndarray, goal: AttackGoal,
                      loss: Optional[LossName] = None) -> np.ndarray:
        image = np.asarray(image, dtype=np.float32).reshape(-1)
        body = self._post("/gradient", {
            "image": [float(v) for v in image],
            "shape": list(self.shape),
            "mode": goal.mode,
            "t": int(goal.label),
            "loss": loss or goal.default_loss(),
        })
        grad = body.get("gradient")
        if not isinstance(grad, list) or len(grad) != image.size:
            raise MalformedResponse(f"bad gradient payload: {body!r}")
        return np.asarray(grad, dtype=np.float32)


class RemoteSurrogate:
    """Uses a remote oracle's /gradient endpoint as the surrogate; the
    remote model plays the substitute, not the target, so no ledger."""

    def __init__(self, oracle: RemoteOracle, loss: Optional[LossName] = None):
        self.oracle = oracle
        self.loss = loss

    def gradient(self, image, goal):
        return self.oracle.true_gradient(image, goal, self.loss)


def mean_surrogate_cosine(target_oracle, surrogate, images, goal_fn) -> Optional[float]:
    """Average cosine(surrogate gradient, true gradient) over a set of
    images; None when the target has no diagnostic gradient channel."""
    if not hasattr(target_oracle, "true_gradient"):
        return None
    vals = []
    for idx, image in enumerate(images):
        goal = goal_fn(idx)
        tg = target_oracle.true_gradient(image, goal)
        sg = surrogate.gradient(image, goal)
        if l2_norm(tg) == 0.0 or l2_norm(sg) == 0.0:
            continue
        vals.append(cosine_similarity(sg, tg))
    return float(np.mean(vals)) if vals else None
