"""The conformal interval methods.

Each method exposes ``calibrate_*`` (train + calib -> CalibratedModel) and is
served by :func:`predict_interval` / :func:`predict_intervals`.  Regression
methods consume raw logits; the ordinal methods consume softmaxed
probabilities.  Calibrated models are immutable, their prediction functions
pure, and every model serializes to a versioned JSON document.

Methods
-------
split_abs    absolute-residual split conformal around a point prediction
cqr          conformalized quantile regression (symmetric correction)
asym_cqr     CQR with independently calibrated lower/upper corrections
chr          nested shortest histogram intervals indexed by confidence level
lvd          kernel-weighted local quantile of absolute residuals
r2ccp        superlevel set of an interpolated bin density, merged to one run
ordinal_aps  greedy contiguous prediction set grown from the modal rating
ordinal_rc   same growth on per-label weighted mass
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .core import (
    Dataset,
    Interval,
    LabelScale,
    ValidationError,
    conformal_quantile,
    lower_conformal_quantile,
)
from .estimators import (
    CLASSIFIER_DEFAULTS,
    FOREST_DEFAULTS,
    BinClassifier,
    KernelSimilarity,
    QuantileForest,
    RidgePredictor,
)
from .ratings import rating_values, softmax, weighted_average

__all__ = [
    "METHODS",
    "CalibratedModel",
    "calibrate",
    "calibrate_split_abs",
    "calibrate_cqr",
    "calibrate_asym_cqr",
    "calibrate_chr",
    "calibrate_lvd",
    "calibrate_r2ccp",
    "calibrate_ordinal_aps",
    "calibrate_ordinal_rc",
    "predict_interval",
    "predict_intervals",
    "predict_intervals_flagged",
    "score_samples",
    "model_to_json",
    "model_from_json",
]

METHODS = ("split_abs", "cqr", "asym_cqr", "chr", "lvd", "r2ccp", "ordinal_aps", "ordinal_rc")

POINT_PREDICTORS = ("raw_score", "weighted_average", "ridge")

DEFAULT_HYPER = {
    "split_abs": {"point_predictor": "raw_score", "l2": 1.0},
    "cqr": dict(FOREST_DEFAULTS),
    "asym_cqr": dict(FOREST_DEFAULTS),
    "chr": {"T": 100, **CLASSIFIER_DEFAULTS},
    "lvd": {"l2": 1.0, "bandwidth": None},
    "r2ccp": dict(CLASSIFIER_DEFAULTS),
    "ordinal_aps": {},
    "ordinal_rc": {},
}

_TOL = 1e-12


@dataclass(frozen=True)
class CalibratedModel:
    """A method's fitted estimator state plus its calibrated quantile(s)."""

    method: str
    alpha: float
    scale: LabelScale
    k: int
    qhat: object
    state: dict
    calib_scores: np.ndarray

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError("alpha must lie in (0, 1)")
        # lvd keeps qhat local to each query and stores None here
        values = self.qhat if isinstance(self.qhat, tuple) else (self.qhat,)
        for v in values:
            if v is not None and not math.isfinite(v):
                raise ValidationError("calibrated quantile must be finite")


def _clamped(lo: float, hi: float, scale: LabelScale) -> Interval:
    lo = min(max(lo, scale.min), scale.max)
    hi = min(max(hi, scale.min), scale.max)
    return Interval(lo, max(lo, hi))


def _check_dim(model: CalibratedModel, Z: np.ndarray) -> np.ndarray:
    Z = np.atleast_2d(np.asarray(Z, dtype=float))
    if Z.shape[1] != model.k:
        raise ValidationError(f"expected {model.k}-dimensional features, got {Z.shape[1]}")
    return Z


# ---------------------------------------------------------------------------
# split absolute residual


def _point_predictions(state: dict, scale: LabelScale, Z: np.ndarray, y_hats) -> np.ndarray:
    kind = state["point_predictor"]
    if kind == "raw_score":
        if y_hats is None:
            raise ValidationError("raw_score predictor needs the judge scores")
        return np.asarray(y_hats, dtype=float)
    if kind == "weighted_average":
        return np.atleast_1d(weighted_average(Z, scale))
    ridge = RidgePredictor.from_dict(state["ridge"])
    return ridge.predict(Z)


def calibrate_split_abs(train: Dataset, calib: Dataset, alpha: float,
                        point_predictor: str = "raw_score", hyper: dict | None = None) -> CalibratedModel:
    h = {**DEFAULT_HYPER["split_abs"], **(hyper or {})}
    if point_predictor not in POINT_PREDICTORS:
        raise ValidationError(f"unknown point predictor {point_predictor!r}")
    state = {"point_predictor": point_predictor, "ridge": None}
    if point_predictor == "ridge":
        ridge = RidgePredictor(l2=h["l2"]).fit(train.logits, train.labels)
        state["ridge"] = ridge.to_dict()
    preds = _point_predictions(state, calib.scale, calib.logits, calib.raw_scores)
    scores = np.abs(preds - calib.labels)
    qhat = conformal_quantile(scores, alpha)
    return CalibratedModel("split_abs", alpha, calib.scale, calib.k, qhat, state, scores)


def _predict_split_abs(model: CalibratedModel, Z: np.ndarray, y_hats):
    preds = _point_predictions(model.state, model.scale, Z, y_hats)
    q = model.qhat
    return [_clamped(p - q, p + q, model.scale) for p in preds]


# ---------------------------------------------------------------------------
# CQR and asymmetric CQR


def _forest_bounds(state: dict, Z: np.ndarray):
    lo = QuantileForest.from_dict(state["forest_lo"]).predict(Z)
    hi = QuantileForest.from_dict(state["forest_hi"]).predict(Z)
    # crossing estimates are re-sorted so the lower bound stays below
    return np.minimum(lo, hi), np.maximum(lo, hi)


def calibrate_cqr(train: Dataset, calib: Dataset, alpha: float, hyper: dict | None = None) -> CalibratedModel:
    h = {**DEFAULT_HYPER["cqr"], **(hyper or {})}
    f_lo = QuantileForest(alpha / 2, h["n_trees"], h["depth"], h["lr"], h["min_leaf"], h["seed"])
    f_hi = QuantileForest(1 - alpha / 2, h["n_trees"], h["depth"], h["lr"], h["min_leaf"], h["seed"])
    f_lo.fit(train.logits, train.labels)
    f_hi.fit(train.logits, train.labels)
    state = {"forest_lo": f_lo.to_dict(), "forest_hi": f_hi.to_dict()}
    lo, hi = _forest_bounds(state, calib.logits)
    scores = np.maximum(lo - calib.labels, calib.labels - hi)
    qhat = conformal_quantile(scores, alpha)
    return CalibratedModel("cqr", alpha, calib.scale, calib.k, qhat, state, scores)


def _predict_cqr(model: CalibratedModel, Z: np.ndarray, _y_hats):
    lo, hi = _forest_bounds(model.state, Z)
    q = model.qhat
    return [_clamped(a - q, b + q, model.scale) for a, b in zip(lo, hi)]


def calibrate_asym_cqr(train: Dataset, calib: Dataset, alpha: float, hyper: dict | None = None) -> CalibratedModel:
    h = {**DEFAULT_HYPER["asym_cqr"], **(hyper or {})}
    f_lo = QuantileForest(alpha, h["n_trees"], h["depth"], h["lr"], h["min_leaf"], h["seed"])
    f_hi = QuantileForest(1 - alpha, h["n_trees"], h["depth"], h["lr"], h["min_leaf"], h["seed"])
    f_lo.fit(train.logits, train.labels)
    f_hi.fit(train.logits, train.labels)
    state = {"forest_lo": f_lo.to_dict(), "forest_hi": f_hi.to_dict()}
    lo, hi = _forest_bounds(state, calib.logits)
    s_lo = lo - calib.labels
    s_hi = calib.labels - hi
    # each side is calibrated at level 1 - alpha/2 so the union of the two
    # one-sided miss events stays below alpha
    q_lo = conformal_quantile(s_lo, alpha / 2)
    q_hi = conformal_quantile(s_hi, alpha / 2)
    scores = np.stack([s_lo, s_hi], axis=1)
    return CalibratedModel("asym_cqr", alpha, calib.scale, calib.k, (q_lo, q_hi), state, scores)


def _predict_asym_cqr(model: CalibratedModel, Z: np.ndarray, _y_hats):
    lo, hi = _forest_bounds(model.state, Z)
    q_lo, q_hi = model.qhat
    return [_clamped(a - q_lo, b + q_hi, model.scale) for a, b in zip(lo, hi)]


# ---------------------------------------------------------------------------
# CHR: nested shortest histogram intervals


def _run_table(m: int):
    """All contiguous bin runs ordered by (width, start), plus a containment
    matrix: contains[i, j] is True when run j is a superset of run i."""
    lo = []
    hi = []
    for width in range(m):
        for start in range(m - width):
            lo.append(start)
            hi.append(start + width)
    lo = np.asarray(lo)
    hi = np.asarray(hi)
    contains = (lo[None, :] <= lo[:, None]) & (hi[None, :] >= hi[:, None])
    return lo, hi, contains


def _chr_level_runs(probs: np.ndarray, T: int):
    """(n, T+1) run indices of the nested interval family per sample.

    The family starts at the modal bin and, level by level, grows to the
    shortest containing run whose mass meets the level (the full-support
    run backstops numerical shortfalls at the top level)."""
    n, m = probs.shape
    run_lo, run_hi, contains = _run_table(m)
    csum = np.concatenate([np.zeros((n, 1)), np.cumsum(probs, axis=1)], axis=1)
    mass = csum[:, run_hi + 1] - csum[:, run_lo]
    cur = np.argmax(probs, axis=1)
    levels = np.empty((n, T + 1), dtype=np.int64)
    full = len(run_lo) - 1
    for t in range(T + 1):
        ok = (mass >= t / T - 1e-9) & contains[cur]
        ok[:, full] = True
        cur = np.argmax(ok, axis=1)
        levels[:, t] = cur
    return levels, run_lo, run_hi


def _chr_scores(classifier: BinClassifier, T: int, Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    probs = classifier.predict_proba(Z)
    levels, run_lo, run_hi = _chr_level_runs(probs, T)
    bins = classifier.bins
    ybin = np.argmin(np.abs(y[:, None] - bins[None, :]), axis=1)
    inside = (run_lo[levels] <= ybin[:, None]) & (ybin[:, None] <= run_hi[levels])
    # a label the family never reaches (all its mass truncated) scores
    # beyond the top level and simply stays uncovered
    s = np.where(inside.any(axis=1), np.argmax(inside, axis=1), T + 1)
    return s.astype(float)


def calibrate_chr(train: Dataset, calib: Dataset, alpha: float, hyper: dict | None = None) -> CalibratedModel:
    h = {**DEFAULT_HYPER["chr"], **(hyper or {})}
    clf = BinClassifier(train.scale.labels(), h["epochs"], h["lr"], h["l2"], h["seed"])
    clf.fit(train.logits, train.labels)
    T = int(h["T"])
    scores = _chr_scores(clf, T, calib.logits, calib.labels)
    level = int(min(max(conformal_quantile(scores, alpha), 0), T))
    state = {"classifier": clf.to_dict(), "T": T}
    return CalibratedModel("chr", alpha, calib.scale, calib.k, float(level), state, scores)


def _predict_chr(model: CalibratedModel, Z: np.ndarray, _y_hats):
    clf = BinClassifier.from_dict(model.state["classifier"])
    T = model.state["T"]
    probs = clf.predict_proba(Z)
    levels, run_lo, run_hi = _chr_level_runs(probs, T)
    t = int(model.qhat)
    bins = clf.bins
    out = []
    for i in range(Z.shape[0]):
        r = levels[i, t]
        out.append(_clamped(bins[run_lo[r]], bins[run_hi[r]], model.scale))
    return out


# ---------------------------------------------------------------------------
# LVD: locally weighted residual quantile


def calibrate_lvd(train: Dataset, calib: Dataset, alpha: float, hyper: dict | None = None) -> CalibratedModel:
    h = {**DEFAULT_HYPER["lvd"], **(hyper or {})}
    ridge = RidgePredictor(l2=h["l2"]).fit(train.logits, train.labels)
    kernel = KernelSimilarity(h["bandwidth"]).fit(train.logits)
    if kernel.bandwidth is None:
        kernel.bandwidth = kernel.median_bandwidth(calib.logits)
    scores = np.abs(ridge.predict(calib.logits) - calib.labels)
    order = np.argsort(scores, kind="stable")
    state = {
        "ridge": ridge.to_dict(),
        "kernel": kernel.to_dict(),
        "calib_logits": calib.logits.tolist(),
        "sorted_scores": scores[order].tolist(),
        "sort_order": order.tolist(),
    }
    return CalibratedModel("lvd", alpha, calib.scale, calib.k, None, state, scores)


def _lvd_local_quantiles(model: CalibratedModel, Z: np.ndarray) -> np.ndarray:
    kernel = KernelSimilarity.from_dict(model.state["kernel"])
    calib_Z = np.asarray(model.state["calib_logits"], dtype=float)
    sorted_scores = np.asarray(model.state["sorted_scores"], dtype=float)
    order = np.asarray(model.state["sort_order"], dtype=int)
    w = kernel.weights_batch(calib_Z, Z)[:, order]
    cum = np.cumsum(w, axis=1)
    # first score index where the weighted mass reaches 1 - alpha
    idx = np.argmax(cum >= (1.0 - model.alpha) - _TOL, axis=1)
    reached = cum[np.arange(len(Z)), idx] >= (1.0 - model.alpha) - _TOL
    idx = np.where(reached, idx, len(sorted_scores) - 1)
    return sorted_scores[idx]


def _predict_lvd(model: CalibratedModel, Z: np.ndarray, _y_hats):
    ridge = RidgePredictor.from_dict(model.state["ridge"])
    preds = ridge.predict(Z)
    qs = _lvd_local_quantiles(model, Z)
    return [_clamped(p - q, p + q, model.scale) for p, q in zip(preds, qs)]


# ---------------------------------------------------------------------------
# R2CCP: interpolated bin-density superlevel sets


def _bin_densities(classifier: BinClassifier, scale: LabelScale, Z: np.ndarray) -> np.ndarray:
    return classifier.predict_proba(Z) / scale.step


def _density_at(classifier: BinClassifier, scale: LabelScale, Z: np.ndarray, y: np.ndarray) -> np.ndarray:
    dens = _bin_densities(classifier, scale, Z)
    bins = classifier.bins
    out = np.empty(len(y))
    for i in range(len(y)):
        out[i] = np.interp(y[i], bins, dens[i])
    return out


def calibrate_r2ccp(train: Dataset, calib: Dataset, alpha: float, hyper: dict | None = None) -> CalibratedModel:
    h = {**DEFAULT_HYPER["r2ccp"], **(hyper or {})}
    clf = BinClassifier(train.scale.labels(), h["epochs"], h["lr"], h["l2"], h["seed"])
    clf.fit(train.logits, train.labels)
    scores = _density_at(clf, calib.scale, calib.logits, calib.labels)
    qhat = lower_conformal_quantile(scores, alpha)
    state = {"classifier": clf.to_dict()}
    return CalibratedModel("r2ccp", alpha, calib.scale, calib.k, qhat, state, scores)


def _superlevel_interval(bins: np.ndarray, dens: np.ndarray, q: float, scale: LabelScale):
    """Span of {a : density(a) >= q} merged to a single interval; None when
    the density never reaches q."""
    above = dens >= q
    if not above.any():
        return None
    i0 = int(np.argmax(above))
    i1 = len(dens) - 1 - int(np.argmax(above[::-1]))
    if i0 == 0 or dens[i0 - 1] >= q:
        lo = bins[0] if i0 == 0 else bins[i0 - 1]
    else:
        lo = bins[i0 - 1] + (bins[i0] - bins[i0 - 1]) * (q - dens[i0 - 1]) / (dens[i0] - dens[i0 - 1])
    if i1 == len(dens) - 1 or dens[i1 + 1] >= q:
        hi = bins[-1] if i1 == len(dens) - 1 else bins[i1 + 1]
    else:
        hi = bins[i1] + (bins[i1 + 1] - bins[i1]) * (dens[i1] - q) / (dens[i1] - dens[i1 + 1])
    return lo, hi


def _predict_r2ccp(model: CalibratedModel, Z: np.ndarray, _y_hats):
    clf = BinClassifier.from_dict(model.state["classifier"])
    dens = _bin_densities(clf, model.scale, Z)
    bins = clf.bins
    q = model.qhat
    intervals = []
    flags = []
    for i in range(Z.shape[0]):
        span = _superlevel_interval(bins, dens[i], q, model.scale)
        if span is None:
            peak = bins[int(np.argmax(dens[i]))]
            intervals.append(_clamped(peak, peak, model.scale))
            flags.append("degenerate")
        else:
            intervals.append(_clamped(span[0], span[1], model.scale))
            flags.append(None)
    return intervals, flags


# ---------------------------------------------------------------------------
# Ordinal growth methods


def _ordinal_growth_scores(values: np.ndarray, ratings: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Accumulated (weighted) mass of the greedy contiguous set at the step
    where it first spans each true label."""
    n, k = values.shape
    left = np.argmax(values, axis=1)
    right = left.copy()
    mass = values[np.arange(n), left]
    scores = np.full(n, np.nan)

    def record(l, r, m, s):
        inside = (ratings[l] - 1e-9 <= y) & (y <= ratings[r] + 1e-9) & np.isnan(s)
        s[inside] = m[inside]
        return s

    scores = record(left, right, mass, scores)
    for _ in range(k - 1):
        can_l = left > 0
        can_r = right < k - 1
        vl = np.where(can_l, values[np.arange(n), np.maximum(left - 1, 0)], -np.inf)
        vr = np.where(can_r, values[np.arange(n), np.minimum(right + 1, k - 1)], -np.inf)
        active = can_l | can_r
        go_left = active & (vl >= vr)
        go_right = active & ~go_left
        mass = mass + np.where(go_left, vl, 0.0) + np.where(go_right, vr, 0.0)
        left = np.where(go_left, left - 1, left)
        right = np.where(go_right, right + 1, right)
        scores = record(left, right, mass, scores)
    return scores


def _ordinal_growth_predict(values: np.ndarray, ratings: np.ndarray, qhat: float):
    """Greedy contiguous set grown until its (weighted) mass reaches qhat;
    stops at full support if the mass never gets there."""
    n, k = values.shape
    left = np.argmax(values, axis=1)
    right = left.copy()
    mass = values[np.arange(n), left]
    done = mass >= qhat - _TOL
    for _ in range(k - 1):
        can_l = left > 0
        can_r = right < k - 1
        vl = np.where(can_l, values[np.arange(n), np.maximum(left - 1, 0)], -np.inf)
        vr = np.where(can_r, values[np.arange(n), np.minimum(right + 1, k - 1)], -np.inf)
        active = ~done & (can_l | can_r)
        go_left = active & (vl >= vr)
        go_right = active & ~go_left
        mass = mass + np.where(go_left, vl, 0.0) + np.where(go_right, vr, 0.0)
        left = np.where(go_left, left - 1, left)
        right = np.where(go_right, right + 1, right)
        done = done | (mass >= qhat - _TOL)
    return left, right


def _ordinal_values(Z: np.ndarray, h: np.ndarray | None):
    probs = np.atleast_2d(softmax(Z))
    if h is not None:
        probs = probs * h[None, :]
    return probs


def calibrate_ordinal_aps(calib: Dataset, alpha: float) -> CalibratedModel:
    ratings = rating_values(calib.scale, calib.k)
    values = _ordinal_values(calib.logits, None)
    scores = _ordinal_growth_scores(values, ratings, calib.labels)
    qhat = conformal_quantile(scores, alpha)
    return CalibratedModel("ordinal_aps", alpha, calib.scale, calib.k, qhat, {}, scores)


def calibrate_ordinal_rc(calib: Dataset, alpha: float, weights=None) -> CalibratedModel:
    h = np.ones(calib.k) if weights is None else np.asarray(weights, dtype=float)
    if h.shape != (calib.k,):
        raise ValidationError(f"need {calib.k} label weights")
    if np.any(h <= 0):
        raise ValidationError("label weights must be positive")
    ratings = rating_values(calib.scale, calib.k)
    values = _ordinal_values(calib.logits, h)
    scores = _ordinal_growth_scores(values, ratings, calib.labels)
    qhat = conformal_quantile(scores, alpha)
    return CalibratedModel("ordinal_rc", alpha, calib.scale, calib.k, qhat, {"h": h.tolist()}, scores)


def _predict_ordinal(model: CalibratedModel, Z: np.ndarray, _y_hats):
    h = np.asarray(model.state["h"], dtype=float) if model.method == "ordinal_rc" else None
    ratings = rating_values(model.scale, model.k)
    values = _ordinal_values(Z, h)
    left, right = _ordinal_growth_predict(values, ratings, model.qhat)
    return [_clamped(ratings[l], ratings[r], model.scale) for l, r in zip(left, right)]


# ---------------------------------------------------------------------------
# Dispatch


_CALIBRATORS = {
    "split_abs": lambda train, calib, alpha, hyper, kw: calibrate_split_abs(
        train, calib, alpha, kw.get("point_predictor", (hyper or {}).get("point_predictor", "raw_score")), hyper),
    "cqr": lambda train, calib, alpha, hyper, kw: calibrate_cqr(train, calib, alpha, hyper),
    "asym_cqr": lambda train, calib, alpha, hyper, kw: calibrate_asym_cqr(train, calib, alpha, hyper),
    "chr": lambda train, calib, alpha, hyper, kw: calibrate_chr(train, calib, alpha, hyper),
    "lvd": lambda train, calib, alpha, hyper, kw: calibrate_lvd(train, calib, alpha, hyper),
    "r2ccp": lambda train, calib, alpha, hyper, kw: calibrate_r2ccp(train, calib, alpha, hyper),
    "ordinal_aps": lambda train, calib, alpha, hyper, kw: calibrate_ordinal_aps(calib, alpha),
    "ordinal_rc": lambda train, calib, alpha, hyper, kw: calibrate_ordinal_rc(calib, alpha, kw.get("weights")),
}


def calibrate(method: str, train: Dataset, calib: Dataset, alpha: float,
              hyper: dict | None = None, **kw) -> CalibratedModel:
    """Calibrate one method by name; see :data:`METHODS`."""
    if method not in _CALIBRATORS:
        raise ValidationError(f"unknown method {method!r}; valid: {', '.join(METHODS)}")
    return _CALIBRATORS[method](train, calib, alpha, hyper, kw)


def predict_intervals_flagged(model: CalibratedModel, Z, y_hats=None):
    """Batch prediction returning (intervals, flags); a flag marks the rare
    degenerate fallback (currently only r2ccp's empty superlevel set)."""
    Z = _check_dim(model, Z)
    if model.method == "split_abs":
        ivals = _predict_split_abs(model, Z, y_hats)
    elif model.method == "cqr":
        ivals = _predict_cqr(model, Z, y_hats)
    elif model.method == "asym_cqr":
        ivals = _predict_asym_cqr(model, Z, y_hats)
    elif model.method == "chr":
        ivals = _predict_chr(model, Z, y_hats)
    elif model.method == "lvd":
        ivals = _predict_lvd(model, Z, y_hats)
    elif model.method == "r2ccp":
        return _predict_r2ccp(model, Z, y_hats)
    else:
        ivals = _predict_ordinal(model, Z, y_hats)
    return ivals, [None] * len(ivals)


def predict_intervals(model: CalibratedModel, Z, y_hats=None):
    return predict_intervals_flagged(model, Z, y_hats)[0]


def predict_interval(model: CalibratedModel, z, y_hat=None) -> Interval:
    """Prediction interval for a single point, clamped to the scale range
    and never empty before boundary adjustment."""
    y_hats = None if y_hat is None else np.asarray([y_hat], dtype=float)
    return predict_intervals(model, np.atleast_2d(np.asarray(z, dtype=float)), y_hats)[0]


def score_samples(model: CalibratedModel, dataset: Dataset) -> np.ndarray:
    """Non-conformity scores of samples under an already-calibrated model;
    on its own calibration set this reproduces ``model.calib_scores``."""
    Z = dataset.logits
    y = dataset.labels
    if model.method == "split_abs":
        preds = _point_predictions(model.state, model.scale, Z, dataset.raw_scores)
        return np.abs(preds - y)
    if model.method == "cqr":
        lo, hi = _forest_bounds(model.state, Z)
        return np.maximum(lo - y, y - hi)
    if model.method == "asym_cqr":
        lo, hi = _forest_bounds(model.state, Z)
        return np.stack([lo - y, y - hi], axis=1)
    if model.method == "chr":
        clf = BinClassifier.from_dict(model.state["classifier"])
        return _chr_scores(clf, model.state["T"], Z, y)
    if model.method == "lvd":
        ridge = RidgePredictor.from_dict(model.state["ridge"])
        return np.abs(ridge.predict(Z) - y)
    if model.method == "r2ccp":
        clf = BinClassifier.from_dict(model.state["classifier"])
        return _density_at(clf, model.scale, Z, y)
    h = np.asarray(model.state["h"], dtype=float) if model.method == "ordinal_rc" else None
    ratings = rating_values(model.scale, model.k)
    values = _ordinal_values(Z, h)
    return _ordinal_growth_scores(values, ratings, y)


# ---------------------------------------------------------------------------
# Serialization


def model_to_json(model: CalibratedModel) -> str:
    qhat = list(model.qhat) if isinstance(model.qhat, tuple) else model.qhat
    doc = {
        "format": "confjudge-model",
        "v": 1,
        "method": model.method,
        "alpha": model.alpha,
        "scale": model.scale.to_dict(),
        "k": model.k,
        "qhat": qhat,
        "state": model.state,
        "calib_scores": np.asarray(model.calib_scores).tolist(),
    }
    return json.dumps(doc)


def model_from_json(text: str) -> CalibratedModel:
    doc = json.loads(text)
    if doc.get("format") != "confjudge-model" or doc.get("v") != 1:
        raise ValidationError("unrecognized model document")
    qhat = doc["qhat"]
    if isinstance(qhat, list):
        qhat = tuple(qhat)
    return CalibratedModel(
        method=doc["method"],
        alpha=doc["alpha"],
        scale=LabelScale.from_dict(doc["scale"]),
        k=doc["k"],
        qhat=qhat,
        state=doc["state"],
        calib_scores=np.asarray(doc["calib_scores"], dtype=float),
    )
