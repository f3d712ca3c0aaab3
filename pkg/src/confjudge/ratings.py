"""Helpers tying the K rating tokens to values on a label scale."""

from __future__ import annotations

import numpy as np

from .core import LabelScale

__all__ = ["softmax", "rating_values", "weighted_average"]


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax of logits (1-D input returns a 1-D simplex point)."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    z2 = np.atleast_2d(z)
    z2 = z2 - z2.max(axis=1, keepdims=True)
    e = np.exp(z2)
    p = e / e.sum(axis=1, keepdims=True)
    return p[0] if single else p


def rating_values(scale: LabelScale, k: int) -> np.ndarray:
    """Scale-unit values of the k rating tokens: 1..k mapped linearly onto
    [scale.min, scale.max].  Identity for a Likert scale."""
    if k == 1:
        return np.array([scale.min])
    return scale.min + (scale.max - scale.min) * np.arange(k) / (k - 1)


def weighted_average(logits, scale: LabelScale | None = None):
    """Probability-weighted mean rating: softmax the logits, average the
    1..K rating values, then map to scale units when the scale differs
    from 1..K.  Accepts a single logit vector or an (n, K) matrix."""
    z = np.asarray(logits, dtype=float)
    single = z.ndim == 1
    p = np.atleast_2d(softmax(z))
    k = p.shape[1]
    raw = p @ (1.0 + np.arange(k))
    if scale is not None:
        values = rating_values(scale, k)
        raw = values[0] + (raw - 1.0) * (values[-1] - values[0]) / max(k - 1, 1)
    return float(raw[0]) if single else raw
