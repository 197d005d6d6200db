"""Attack objective losses and the success predicate.

Both losses are *maximized* by the attack and evaluated from raw logits:
the max-margin logit loss for untargeted attacks and the negative
cross-entropy for targeted ones (overridable per config).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .errors import IndexOutOfRange, NonFinite

__all__ = [
    "AttackGoal",
    "margin_loss",
    "neg_cross_entropy",
    "attack_loss",
    "is_success",
    "validate_logits",
]

LossName = Literal["margin", "neg-xent"]


@dataclass(frozen=True)
class AttackGoal:
    """Untargeted (label = true class) or targeted (label = target class)."""

    mode: Literal["untargeted", "targeted"]
    label: int

    def __post_init__(self):
        if self.mode not in ("untargeted", "targeted"):
            raise ValueError(f"bad mode {self.mode!r}")
        if self.label < 0:
            raise IndexOutOfRange(f"negative class index {self.label}")

    @property
    def targeted(self) -> bool:
        return self.mode == "targeted"

    def default_loss(self) -> LossName:
        return "neg-xent" if self.targeted else "margin"


def validate_logits(logits) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    if z.size < 2:
        raise IndexOutOfRange(f"need at least 2 classes, got {z.size}")
    if not np.all(np.isfinite(z)):
        raise NonFinite("logits contain NaN or Inf")
    return z


def _check_index(t: int, k: int):
    if not 0 <= t < k:
        raise IndexOutOfRange(f"class index {t} out of range [0, {k})")


def margin_loss(logits, t: int) -> float:
    """max over j != t of (logit_j - logit_t); positive iff the argmax has
    moved away from class t (strictly; ties give 0)."""
    z = validate_logits(logits)
    _check_index(t, z.size)
    others = np.delete(z, t)
    return float(np.max(others) - z[t])


def neg_cross_entropy(logits, t: int) -> float:
    """log softmax probability of class t, computed with a max shift."""
    z = validate_logits(logits)
    _check_index(t, z.size)
    m = np.max(z)
    return float(z[t] - m - np.log(np.sum(np.exp(z - m))))


def attack_loss(logits, goal: AttackGoal, loss: Optional[LossName] = None) -> float:
    """Dispatch to the loss for this goal (margin when untargeted, negative
    cross-entropy when targeted, unless overridden)."""
    name = loss or goal.default_loss()
    if name == "margin":
        return margin_loss(logits, goal.label)
    if name == "neg-xent":
        return neg_cross_entropy(logits, goal.label)
    raise ValueError(f"unknown loss {name!r}")


def is_success(logits, goal: AttackGoal) -> bool:
    """Untargeted: argmax != label; targeted: argmax == label.

    Argmax ties break to the lowest class index, matching how deployed
    classifiers report a single class.
    """
    z = validate_logits(logits)
    _check_index(goal.label, z.size)
    pred = int(np.argmax(z))
    return pred == goal.label if goal.targeted else pred != goal.label
