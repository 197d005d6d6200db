"""Dataset manifests, raw-tensor I/O, and synthetic benchmark generation.

The on-disk format is a JSON manifest next to a raw file of concatenated
little-endian float32 tensors.  `generate_synthetic_dataset` builds
Gaussian class clusters in [0,1]^d together with a target classifier fit
to them and a distinct surrogate classifier, keeping only images the
target classifies correctly.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import (
    DegenerateClusters,
    LabelOutOfRange,
    ManifestError,
    SizeMismatch,
)
from .models import LinearModel, Mlp2Model, save_model
from .tensors import ImageTensor, box_clamp

__all__ = [
    "DatasetManifest",
    "load_manifest",
    "load_dataset",
    "write_dataset",
    "generate_synthetic_dataset",
    "train_mlp2",
]


@dataclass
class DatasetManifest:
    shape: Tuple[int, ...]
    count: int
    labels: List[int]
    data_file: str
    dtype: str = "f32le"
    num_classes: Optional[int] = None
    seed: Optional[int] = None
    target_weights: Optional[str] = None
    surrogate_weights: Optional[str] = None

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def to_dict(self) -> dict:
        d = {
            "shape": list(self.shape),
            "count": self.count,
            "dtype": self.dtype,
            "labels": list(int(v) for v in self.labels),
            "data_file": self.data_file,
        }
        for key in ("num_classes", "seed", "target_weights", "surrogate_weights"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        return d


def load_manifest(path: str) -> DatasetManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, ValueError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    try:
        m = DatasetManifest(
            shape=tuple(int(s) for s in raw["shape"]),
            count=int(raw["count"]),
            labels=[int(v) for v in raw["labels"]],
            data_file=str(raw["data_file"]),
            dtype=str(raw.get("dtype", "f32le")),
            num_classes=raw.get("num_classes"),
            seed=raw.get("seed"),
            target_weights=raw.get("target_weights"),
            surrogate_weights=raw.get("surrogate_weights"),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ManifestError(f"malformed manifest {path}: {exc}") from exc
    if m.dtype != "f32le":
        raise ManifestError(f"unsupported dtype {m.dtype!r}")
    if len(m.labels) != m.count:
        raise ManifestError(
            f"{len(m.labels)} labels for {m.count} images"
        )
    return m


def _resolve(base_path: str, rel: str) -> str:
    if os.path.isabs(rel):
        return rel
    return os.path.join(os.path.dirname(os.path.abspath(base_path)), rel)


def load_dataset(manifest_path: str):
    """Load (ImageTensor, label) pairs described by a manifest.

    Raises SizeMismatch when the raw file length disagrees with
    count * dim * 4 bytes and LabelOutOfRange for invalid labels.
    """
    m = load_manifest(manifest_path)
    data_path = _resolve(manifest_path, m.data_file)
    expected = m.count * m.dim * 4
    try:
        actual = os.path.getsize(data_path)
    except OSError as exc:
        raise ManifestError(f"cannot stat data file {data_path}: {exc}") from exc
    if actual != expected:
        raise SizeMismatch(f"data file is {actual} bytes, expected {expected}")
    if m.num_classes is not None:
        for lbl in m.labels:
            if not 0 <= lbl < m.num_classes:
                raise LabelOutOfRange(f"label {lbl} not in [0, {m.num_classes})")
    elif any(lbl < 0 for lbl in m.labels):
        raise LabelOutOfRange("negative label")
    buf = np.fromfile(data_path, dtype="<f4").reshape(m.count, m.dim)
    return [(ImageTensor(buf[i], m.shape), int(m.labels[i])) for i in range(m.count)]


def write_dataset(images: np.ndarray, labels, shape, out_dir: str,
                  num_classes: Optional[int] = None, seed: Optional[int] = None,
                  target=None, surrogate=None,
                  data_name: str = "data.bin") -> str:
    """Write raw data + manifest (and optional model weights) into out_dir;
    returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    images = np.asarray(images, dtype="<f4")
    data_path = os.path.join(out_dir, data_name)
    images.tofile(data_path)
    manifest = DatasetManifest(
        shape=tuple(int(s) for s in shape),
        count=images.shape[0],
        labels=[int(v) for v in labels],
        data_file=data_name,
        num_classes=num_classes,
        seed=seed,
    )
    if target is not None:
        save_model(target, os.path.join(out_dir, "target.json"))
        manifest.target_weights = "target.json"
    if surrogate is not None:
        save_model(surrogate, os.path.join(out_dir, "surrogate.json"))
        manifest.surrogate_weights = "surrogate.json"
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w", encoding="utf-8") as fh:
        json.dump(manifest.to_dict(), fh, indent=2, sort_keys=True)
    return manifest_path


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_mlp2(model: Mlp2Model, X: np.ndarray, y: np.ndarray,
               steps: int = 300, lr: float = 0.5) -> Mlp2Model:
    """Full-batch gradient descent on softmax cross-entropy, in place.

    A fixed small number of steps keeps generation deterministic and fast;
    the point is a usable decision boundary, not state-of-the-art accuracy.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    n = X.shape[0]
    onehot = np.zeros((n, model.num_classes))
    onehot[np.arange(n), y] = 1.0
    for _ in range(steps):
        Z1 = X @ model.W1.T + model.b1
        H = np.tanh(Z1)
        Z2 = H @ model.W2.T + model.b2
        P = _softmax(Z2)
        dZ2 = (P - onehot) / n
        dW2 = dZ2.T @ H
        db2 = dZ2.sum(axis=0)
        dH = dZ2 @ model.W2
        dZ1 = dH * (1.0 - H * H)
        dW1 = dZ1.T @ X
        db1 = dZ1.sum(axis=0)
        model.W2 -= lr * dW2
        model.b2 -= lr * db2
        model.W1 -= lr * dW1
        model.b1 -= lr * db1
    return model


def _fit_linear_discriminant(means: np.ndarray, sigma: float) -> LinearModel:
    # Gaussian classes with shared isotropic covariance -> closed form.
    W = means / (sigma**2)
    b = -0.5 * np.sum(means**2, axis=1) / (sigma**2)
    return LinearModel(W, b)


def generate_synthetic_dataset(
    d: int = 32,
    num_classes: int = 10,
    n: int = 200,
    separation: float = 1.1,
    seed: int = 0,
    model_kind: str = "mlp2",
    hidden: int = 64,
    surrogate_hidden: int = 48,
    noise: Optional[float] = None,
    train_steps: int = 300,
    retry_cap: int = 40,
):
    """Gaussian class clusters in [0,1]^d plus a fitted target model and a
    distinct-seed surrogate model.

    Only images the target classifies correctly are emitted.  Returns
    (images (n, d) float32, labels, target_model, surrogate_model).
    """
    if d < 2 or num_classes < 2 or n < 1 or separation <= 0:
        raise ValueError("need d >= 2, K >= 2, n >= 1, separation > 0")
    rng = np.random.default_rng(seed)
    sigma = noise if noise is not None else separation / 3.0
    dirs = rng.standard_normal((num_classes, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    means = np.clip(0.5 + separation * dirs, 0.1, 0.9)

    def sample(count):
        labels = rng.integers(0, num_classes, size=count)
        pts = means[labels] + sigma * rng.standard_normal((count, d))
        return np.clip(pts, 0.0, 1.0), labels

    train_n = max(1000, 5 * n)
    X_train, y_train = sample(train_n)

    if model_kind == "linear":
        target = _fit_linear_discriminant(means, sigma)
        surrogate = _fit_linear_discriminant(
            np.clip(means + 0.05 * rng.standard_normal(means.shape), 0.1, 0.9),
            sigma,
        )
    elif model_kind == "mlp2":
        target = train_mlp2(
            Mlp2Model(
                rng.standard_normal((hidden, d)) / np.sqrt(d),
                np.zeros(hidden),
                rng.standard_normal((num_classes, hidden)) / np.sqrt(hidden),
                np.zeros(num_classes),
            ),
            X_train, y_train, steps=train_steps,
        )
        sur_rng = np.random.default_rng(seed + 104729)  # distinct stream
        y_sur = sur_rng.integers(0, num_classes, size=train_n)
        X_sur = np.clip(
            means[y_sur] + sigma * sur_rng.standard_normal((train_n, d)), 0.0, 1.0
        )
        surrogate = train_mlp2(
            Mlp2Model(
                sur_rng.standard_normal((surrogate_hidden, d)) / np.sqrt(d),
                np.zeros(surrogate_hidden),
                sur_rng.standard_normal((num_classes, surrogate_hidden))
                / np.sqrt(surrogate_hidden),
                np.zeros(num_classes),
            ),
            X_sur, y_sur, steps=train_steps,
        )
    else:
        raise ValueError(f"unknown model_kind {model_kind!r}")

    images = np.empty((n, d), dtype=np.float32)
    labels_out = np.empty(n, dtype=np.int64)
    have = 0
    for _ in range(retry_cap):
        X, y = sample(max(2 * n, 64))
        for xi, yi in zip(X, y):
            if int(np.argmax(target.logits(xi))) == int(yi):
                images[have] = box_clamp(xi)
                labels_out[have] = yi
                have += 1
                if have == n:
                    return images, labels_out, target, surrogate
    raise DegenerateClusters(
        f"only {have}/{n} correctly classified samples after {retry_cap} rounds"
    )
