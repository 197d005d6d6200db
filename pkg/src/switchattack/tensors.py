"""Flat-vector image math.

Images are 1-D float32 numpy buffers in [0, 1]; every update of the attack
loop goes through the lp-ball projection implemented here.  Accumulations
(norms, dot products) run in float64 to keep the stated tolerances stable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDimension, ShapeMismatch, ZeroGradient, ZeroVector

__all__ = [
    "ImageTensor",
    "lp_normalize",
    "clip_epsilon",
    "box_clamp",
    "cosine_similarity",
    "l2_norm",
    "linf_norm",
    "lp_distance",
]


def _as_f32(x) -> np.ndarray:
    a = np.asarray(x, dtype=np.float32)
    return a.reshape(-1)


@dataclass(frozen=True)
class ImageTensor:
    """A flat float32 pixel buffer plus its logical shape.

    Pixel values are nominally in [0, 1]; `dim` is the product of `shape`.
    """

    data: np.ndarray
    shape: tuple = field(default=None)

    def __post_init__(self):
        data = _as_f32(self.data)
        object.__setattr__(self, "data", data)
        shape = self.shape
        if shape is None:
            shape = (data.size,)
        shape = tuple(int(s) for s in shape)
        if any(s <= 0 for s in shape):
            raise ShapeMismatch(f"non-positive entry in shape {shape}")
        if int(np.prod(shape)) != data.size:
            raise ShapeMismatch(
                f"data length {data.size} != product of shape {shape}"
            )
        object.__setattr__(self, "shape", shape)

    @property
    def dim(self) -> int:
        return self.data.size


def l2_norm(v) -> float:
    """Euclidean norm, accumulated in float64."""
    return float(np.linalg.norm(np.asarray(v, dtype=np.float64)))


def linf_norm(v) -> float:
    a = np.asarray(v, dtype=np.float64)
    return float(np.max(np.abs(a))) if a.size else 0.0


def lp_distance(a, b, p: float) -> float:
    d = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return l2_norm(d) if p == 2 else linf_norm(d)


def lp_normalize(g, p: float) -> np.ndarray:
    """Normalize a raw gradient for an lp-constrained step.

    p=2 rescales to unit Euclidean norm; p=inf takes the elementwise sign
    (sign(0) = 0, so untouched coordinates stay untouched).

    Raises:
        ZeroGradient: if p=2 and the gradient has zero norm.
    """
    g = _as_f32(g)
    if g.size < 1:
        raise ShapeMismatch("empty gradient")
    if p == 2:
        n = l2_norm(g)
        if n == 0.0:
            raise ZeroGradient("cannot l2-normalize a zero gradient")
        return (g.astype(np.float64) / n).astype(np.float32)
    if math.isinf(p):
        return np.sign(g).astype(np.float32)
    raise ValueError(f"unsupported norm p={p!r}")


def box_clamp(x) -> np.ndarray:
    """Clamp every pixel to [0, 1]."""
    return np.clip(_as_f32(x), 0.0, 1.0)


def _feasible(candidate: np.ndarray, origin: np.ndarray, eps: float, p: float) -> bool:
    if np.any(candidate < 0.0) or np.any(candidate > 1.0):
        return False
    return lp_distance(candidate, origin, p) <= eps + 1e-6


def clip_epsilon(candidate, origin, eps: float, p: float) -> np.ndarray:
    """Project a candidate image back into the lp ball around `origin`
    intersected with the [0,1] box.

    Projection order is ball first, then box clamp: both orders agree for
    p=inf; for p=2 this order guarantees box feasibility at the cost of the
    result possibly landing strictly inside the ball.  A candidate that is
    already feasible is returned unchanged.
    """
    candidate = _as_f32(candidate)
    origin = _as_f32(origin)
    if candidate.shape != origin.shape:
        raise ShapeMismatch(
            f"candidate dim {candidate.size} != origin dim {origin.size}"
        )
    if eps <= 0:
        raise ValueError("eps must be positive")
    if _feasible(candidate, origin, eps, p):
        return candidate
    delta = candidate.astype(np.float64) - origin.astype(np.float64)
    if math.isinf(p):
        delta = np.clip(delta, -eps, eps)
    else:
        n = l2_norm(delta)
        if n > eps:
            delta *= eps / n
    projected = (origin.astype(np.float64) + delta).astype(np.float32)
    return box_clamp(projected)


def cosine_similarity(a, b) -> float:
    """Cosine of the angle between two vectors, in [-1, 1].

    Raises:
        ZeroVector: if either vector has zero norm.
    """
    a64 = np.asarray(a, dtype=np.float64).reshape(-1)
    b64 = np.asarray(b, dtype=np.float64).reshape(-1)
    na, nb = l2_norm(a64), l2_norm(b64)
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine similarity undefined for zero vectors")
    return float(np.clip(np.dot(a64, b64) / (na * nb), -1.0, 1.0))


def random_unit_vector(d: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform direction on the unit sphere (normal draw, l2-normalized)."""
    if d < 1:
        raise DegenerateDimension("need d >= 1")
    while True:
        v = rng.standard_normal(d)
        n = l2_norm(v)
        if n > 0:
            return (v / n).astype(np.float32)
