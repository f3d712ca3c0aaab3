"""Boundary adjustment from continuous to ordinal intervals, plus midpoint
extraction.

A continuous interval [l, u] is mapped through the fine grid (``core.to_fine_grid``)
where every admissible label is an integer; shrinking takes ceil(l)/floor(u),
expanding takes floor(l)/ceil(u), and the lambda-nearest policy rounds an
endpoint to its closest label only when it is within ``lam`` of it.  Expanding
or nearest-rounding can only add labels to the interval, so label-counted
coverage never decreases; shrinking removes only label-free margins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Interval, LabelScale, ValidationError, to_fine_grid

__all__ = ["AdjustmentPolicy", "SHRINK", "EXPAND", "NEAREST", "adjust", "midpoint", "fallback_label"]

SHRINK = "shrink"
EXPAND = "expand"
NEAREST = "nearest"

_FP_TOL = 1e-9


@dataclass(frozen=True)
class AdjustmentPolicy:
    """Endpoint policy: ``shrink``, ``expand``, or ``nearest`` with threshold
    ``lam`` in scale units.  ``lam = step/2`` is full adjustment (every
    endpoint lands on a label); ``lam = 0`` is the identity."""

    kind: str
    lam: float = 0.0

    def __post_init__(self):
        if self.kind not in (SHRINK, EXPAND, NEAREST):
            raise ValidationError(f"unknown adjustment policy {self.kind!r}")
        if self.lam < 0:
            raise ValidationError("lambda must be >= 0")

    @staticmethod
    def full(scale: LabelScale) -> "AdjustmentPolicy":
        return AdjustmentPolicy(NEAREST, scale.step / 2.0)

    def validate_for(self, scale: LabelScale) -> None:
        if self.kind == NEAREST and self.lam > scale.step / 2.0 + 1e-12:
            raise ValidationError("lambda must not exceed step/2")


def _adjust_endpoint(x: float, lam_fine: float, mode: str) -> float:
    # x is in fine-grid units where labels are integers; tolerances keep
    # endpoints already on the grid fixed (idempotence).
    if mode == "ceil":
        return math.ceil(x - _FP_TOL)
    if mode == "floor":
        return math.floor(x + _FP_TOL)
    nearest = round(x)
    if abs(x - nearest) <= lam_fine + _FP_TOL:
        return float(nearest)
    return x


def adjust(interval: Interval, scale: LabelScale, policy: AdjustmentPolicy) -> Interval:
    """Apply a boundary-adjustment policy to a continuous interval.

    Returns the adjusted interval in scale units, clamped to the scale
    range.  Shrinking an interval that contains no label yields an
    empty-flagged interval; callers decide the fallback (see
    :func:`fallback_label`).
    """
    if interval.empty:
        raise ValidationError("cannot adjust an empty interval")
    policy.validate_for(scale)
    a, b = to_fine_grid(scale)
    lo = a * interval.lo + b
    hi = a * interval.hi + b
    lam_fine = a * policy.lam

    if policy.kind == SHRINK:
        lo2, hi2 = _adjust_endpoint(lo, 0.0, "ceil"), _adjust_endpoint(hi, 0.0, "floor")
    elif policy.kind == EXPAND:
        lo2, hi2 = _adjust_endpoint(lo, 0.0, "floor"), _adjust_endpoint(hi, 0.0, "ceil")
    else:
        lo2 = _adjust_endpoint(lo, lam_fine, "nearest")
        hi2 = _adjust_endpoint(hi, lam_fine, "nearest")

    if lo2 > hi2 + _FP_TOL:
        return Interval.make_empty()
    new_lo = (lo2 - b) / a
    new_hi = (hi2 - b) / a
    new_lo = min(max(new_lo, scale.min), scale.max)
    new_hi = min(max(new_hi, scale.min), scale.max)
    return Interval(new_lo, max(new_lo, new_hi))


def midpoint(interval: Interval) -> float:
    """(lo + hi) / 2 of a non-empty interval."""
    if interval.empty:
        raise ValidationError("no midpoint")
    return (interval.lo + interval.hi) / 2.0


def fallback_label(continuous: Interval, scale: LabelScale) -> float:
    """Label nearest the continuous midpoint; the degenerate stand-in used
    for width and midpoint accounting when shrinking empties an interval.
    Coverage accounting never uses it: an empty interval covers nothing."""
    return scale.nearest_label(midpoint(continuous))
