"""Fitted predictors wrapped by the conformal methods.

Everything here is deterministic given data order and hyperparameters, uses
plain numpy, and serializes to a versioned dict so calibrated models can be
saved and reloaded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Dataset, ValidationError

__all__ = [
    "QuantileForest",
    "BinClassifier",
    "KernelSimilarity",
    "RidgePredictor",
    "OlsFit",
    "fit_quantile_forest",
    "fit_bin_classifier",
    "kernel_weights",
    "ols",
    "pinball_loss",
]

FOREST_DEFAULTS = {"n_trees": 200, "depth": 3, "lr": 0.05, "min_leaf": 10, "seed": 0}
CLASSIFIER_DEFAULTS = {"epochs": 500, "lr": 0.1, "l2": 1e-3, "seed": 0}


def pinball_loss(y, pred, tau: float) -> float:
    """Mean pinball loss; its minimizer is the conditional tau-quantile."""
    d = np.asarray(y, dtype=float) - np.asarray(pred, dtype=float)
    return float(np.mean(np.maximum(tau * d, (tau - 1.0) * d)))


# ---------------------------------------------------------------------------
# Boosted quantile trees


class _Tree:
    """Depth-limited regression tree stored as flat arrays for fast routing."""

    __slots__ = ("feature", "thresh", "left", "right", "value")

    def __init__(self):
        self.feature = []
        self.thresh = []
        self.left = []
        self.right = []
        self.value = []

    def _add_node(self):
        self.feature.append(-1)
        self.thresh.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def finalize(self):
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.thresh = np.asarray(self.thresh, dtype=float)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=float)
        return self

    def predict(self, X: np.ndarray) -> np.ndarray:
        idx = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            feat = self.feature[idx]
            active = feat >= 0
            if not active.any():
                break
            rows = np.nonzero(active)[0]
            go_left = X[rows, feat[rows]] <= self.thresh[idx[rows]]
            idx[rows] = np.where(go_left, self.left[idx[rows]], self.right[idx[rows]])
        return self.value[idx]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "thresh": self.thresh.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_Tree":
        t = cls()
        t.feature = d["feature"]
        t.thresh = d["thresh"]
        t.left = d["left"]
        t.right = d["right"]
        t.value = d["value"]
        return t.finalize()


def _best_split(X: np.ndarray, g: np.ndarray, min_leaf: int):
    """Least-squares split of the gradient targets g.  Returns
    (feature, threshold, sse) or None when no valid split exists."""
    n = g.shape[0]
    if n < 2 * min_leaf:
        return None
    best = None
    total = g.sum()
    total_sq = (g * g).sum()
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        gs = g[order]
        csum = np.cumsum(gs)[:-1]
        csq = np.cumsum(gs * gs)[:-1]
        k = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (k >= min_leaf) & (n - k >= min_leaf)
        if not valid.any():
            continue
        sse = (csq - csum * csum / k) + ((total_sq - csq) - (total - csum) ** 2 / (n - k))
        sse = np.where(valid, sse, np.inf)
        i = int(np.argmin(sse))
        if not math.isfinite(sse[i]):
            continue
        thr = 0.5 * (xs[i] + xs[i + 1])
        if best is None or sse[i] < best[2] - 1e-12:
            best = (j, thr, float(sse[i]))
    return best


class QuantileForest:
    """Gradient-boosted trees minimizing the pinball loss at level ``tau``.

    The initial prediction is the empirical tau-quantile of the training
    labels; each round fits a least-squares tree to the pinball gradient and
    re-estimates leaf values as the tau-quantile of the current residuals,
    matching the usual boosted quantile-regression update.
    """

    def __init__(self, tau: float, n_trees: int = 200, depth: int = 3, lr: float = 0.05,
                 min_leaf: int = 10, seed: int = 0):
        if not 0.0 < tau < 1.0:
            raise ValidationError("tau must lie in (0, 1)")
        self.tau = tau
        self.n_trees = n_trees
        self.depth = depth
        self.lr = lr
        self.min_leaf = min_leaf
        self.seed = seed
        self.base = 0.0
        self.trees: list[_Tree] = []

    def _build(self, tree: _Tree, X, g, resid, rows, depth_left: int) -> int:
        node = tree._add_node()
        split = _best_split(X[rows], g[rows], self.min_leaf) if depth_left > 0 else None
        if split is None:
            tree.value[node] = float(np.quantile(resid[rows], self.tau))
            return node
        j, thr, _ = split
        tree.feature[node] = j
        tree.thresh[node] = thr
        mask = X[rows, j] <= thr
        tree.left[node] = self._build(tree, X, g, resid, rows[mask], depth_left - 1)
        tree.right[node] = self._build(tree, X, g, resid, rows[~mask], depth_left - 1)
        return node

    def fit(self, X, y) -> "QuantileForest":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if len(y) == 0:
            raise ValidationError("empty training set")
        self.base = float(np.quantile(y, self.tau))
        self.trees = []
        pred = np.full(len(y), self.base)
        for _ in range(self.n_trees):
            resid = y - pred
            g = np.where(resid > 0, self.tau, self.tau - 1.0)
            tree = _Tree()
            self._build(tree, X, g, resid, np.arange(len(y)), self.depth)
            tree.finalize()
            self.trees.append(tree)
            pred = pred + self.lr * tree.predict(X)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.full(X.shape[0], self.base)
        for tree in self.trees:
            out += self.lr * tree.predict(X)
        return out

    def to_dict(self) -> dict:
        return {
            "kind": "quantile_forest",
            "v": 1,
            "tau": self.tau,
            "n_trees": self.n_trees,
            "depth": self.depth,
            "lr": self.lr,
            "min_leaf": self.min_leaf,
            "seed": self.seed,
            "base": self.base,
            "trees": [t.to_dict() for t in self.trees],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "QuantileForest":
        qf = cls(d["tau"], d["n_trees"], d["depth"], d["lr"], d["min_leaf"], d["seed"])
        qf.base = d["base"]
        qf.trees = [_Tree.from_dict(t) for t in d["trees"]]
        return qf


def fit_quantile_forest(train: Dataset, tau: float, hyper: dict | None = None) -> QuantileForest:
    h = {**FOREST_DEFAULTS, **(hyper or {})}
    qf = QuantileForest(tau, h["n_trees"], h["depth"], h["lr"], h["min_leaf"], h["seed"])
    return qf.fit(train.logits, train.labels)


# ---------------------------------------------------------------------------
# Linear softmax bin classifier


class BinClassifier:
    """Multinomial logistic model over the scale's label grid, fit by
    full-batch gradient descent on cross-entropy + L2.

    Features are standardized internally and the step size is halved
    whenever a step would increase the loss, so the training loss is
    non-increasing.  Zero epochs leave the zero-initialized weights in
    place (uniform probabilities).
    """

    def __init__(self, bins, epochs: int = 500, lr: float = 0.1, l2: float = 1e-3, seed: int = 0):
        self.bins = np.asarray(bins, dtype=float)
        self.epochs = epochs
        self.lr = lr
        self.l2 = l2
        self.seed = seed
        self.weights = None
        self.bias = None
        self.means = None
        self.stds = None
        self.loss_history: list[float] = []

    def _bin_index(self, y: np.ndarray) -> np.ndarray:
        diffs = np.abs(y[:, None] - self.bins[None, :])
        idx = np.argmin(diffs, axis=1)
        if np.any(diffs[np.arange(len(y)), idx] > 1e-6):
            raise ValidationError("label off the bin grid")
        return idx

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (X - self.means) / self.stds

    def _loss_grad(self, Xs, onehot):
        n = Xs.shape[0]
        logits = Xs @ self.weights.T + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        expv = np.exp(logits)
        probs = expv / expv.sum(axis=1, keepdims=True)
        ll = -np.mean(np.log(np.maximum((probs * onehot).sum(axis=1), 1e-300)))
        loss = ll + 0.5 * self.l2 * float((self.weights ** 2).sum())
        diff = probs - onehot
        grad_w = diff.T @ Xs / n + self.l2 * self.weights
        grad_b = diff.mean(axis=0)
        return loss, grad_w, grad_b

    def fit(self, X, y) -> "BinClassifier":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        m = len(self.bins)
        self.means = X.mean(axis=0)
        stds = X.std(axis=0)
        self.stds = np.where(stds > 1e-12, stds, 1.0)
        Xs = self._standardize(X)
        idx = self._bin_index(y)
        onehot = np.zeros((len(y), m))
        onehot[np.arange(len(y)), idx] = 1.0
        self.weights = np.zeros((m, X.shape[1]))
        self.bias = np.zeros(m)
        step = self.lr
        loss, grad_w, grad_b = self._loss_grad(Xs, onehot)
        self.loss_history = [loss]
        for _ in range(self.epochs):
            for _ in range(30):
                w_new = self.weights - step * grad_w
                b_new = self.bias - step * grad_b
                w_old, b_old = self.weights, self.bias
                self.weights, self.bias = w_new, b_new
                new_loss, new_gw, new_gb = self._loss_grad(Xs, onehot)
                if new_loss <= loss + 1e-12:
                    loss, grad_w, grad_b = new_loss, new_gw, new_gb
                    break
                self.weights, self.bias = w_old, b_old
                step *= 0.5
            self.loss_history.append(loss)
        return self

    def predict_proba(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self.weights is None:
            raise ValidationError("classifier not fitted")
        logits = self._standardize(X) @ self.weights.T + self.bias
        logits -= logits.max(axis=1, keepdims=True)
        expv = np.exp(logits)
        return expv / expv.sum(axis=1, keepdims=True)

    def to_dict(self) -> dict:
        return {
            "kind": "bin_classifier",
            "v": 1,
            "bins": self.bins.tolist(),
            "epochs": self.epochs,
            "lr": self.lr,
            "l2": self.l2,
            "seed": self.seed,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BinClassifier":
        bc = cls(d["bins"], d["epochs"], d["lr"], d["l2"], d["seed"])
        bc.weights = np.asarray(d["weights"], dtype=float)
        bc.bias = np.asarray(d["bias"], dtype=float)
        bc.means = np.asarray(d["means"], dtype=float)
        bc.stds = np.asarray(d["stds"], dtype=float)
        return bc


def fit_bin_classifier(train: Dataset, hyper: dict | None = None) -> BinClassifier:
    h = {**CLASSIFIER_DEFAULTS, **(hyper or {})}
    bc = BinClassifier(train.scale.labels(), h["epochs"], h["lr"], h["l2"], h["seed"])
    return bc.fit(train.logits, train.labels)


# ---------------------------------------------------------------------------
# Gaussian kernel similarity


class KernelSimilarity:
    """Gaussian kernel on standardized features.  The bandwidth defaults to
    the median pairwise distance of the calibration features (median
    heuristic) unless set explicitly."""

    def __init__(self, bandwidth: float | None = None):
        self.bandwidth = bandwidth
        self.means = None
        self.stds = None

    def fit(self, X) -> "KernelSimilarity":
        X = np.asarray(X, dtype=float)
        self.means = X.mean(axis=0)
        stds = X.std(axis=0)
        self.stds = np.where(stds > 1e-12, stds, 1.0)
        return self

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.means) / self.stds

    def median_bandwidth(self, X) -> float:
        Xs = self._standardize(X)
        d2 = np.sum((Xs[:, None, :] - Xs[None, :, :]) ** 2, axis=-1)
        tri = d2[np.triu_indices(len(Xs), k=1)]
        bw = float(np.sqrt(np.median(tri))) if tri.size else 1.0
        return bw if bw > 1e-12 else 1.0

    def weights_batch(self, X_calib, Z) -> np.ndarray:
        """(m, n) row-normalized kernel weights of each query against the
        calibration points."""
        if self.means is None:
            raise ValidationError("kernel not fitted")
        bw = self.bandwidth
        if bw is None:
            raise ValidationError("bandwidth not set")
        Xc = self._standardize(X_calib)
        Zq = self._standardize(np.atleast_2d(Z))
        d2 = np.sum((Zq[:, None, :] - Xc[None, :, :]) ** 2, axis=-1)
        if not np.all(np.isfinite(d2)):
            raise ValidationError("degenerate features")
        w = np.exp(-d2 / (2.0 * bw * bw))
        totals = w.sum(axis=1, keepdims=True)
        # queries so far from every point that all kernels underflow fall
        # back to nearest-neighbour weighting
        dead = totals[:, 0] <= 0.0
        if dead.any():
            w[dead] = 0.0
            w[dead, np.argmin(d2[dead], axis=1)] = 1.0
            totals = w.sum(axis=1, keepdims=True)
        return w / totals

    def to_dict(self) -> dict:
        return {
            "kind": "kernel_similarity",
            "v": 1,
            "bandwidth": self.bandwidth,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSimilarity":
        ks = cls(d["bandwidth"])
        ks.means = np.asarray(d["means"], dtype=float)
        ks.stds = np.asarray(d["stds"], dtype=float)
        return ks


def kernel_weights(sim: KernelSimilarity, calib: Dataset, z_test) -> np.ndarray:
    """Normalized weights of one query point against a calibration set."""
    if len(calib) == 0:
        raise ValidationError("empty calibration")
    return sim.weights_batch(calib.logits, np.asarray(z_test, dtype=float))[0]


# ---------------------------------------------------------------------------
# Ridge point predictor


class RidgePredictor:
    """Closed-form ridge regression on standardized features."""

    def __init__(self, l2: float = 1.0):
        if l2 < 0:
            raise ValidationError("l2 must be >= 0")
        self.l2 = l2
        self.coef = None
        self.intercept = 0.0
        self.means = None
        self.stds = None

    def fit(self, X, y) -> "RidgePredictor":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.means = X.mean(axis=0)
        stds = X.std(axis=0)
        self.stds = np.where(stds > 1e-12, stds, 1.0)
        Xs = (X - self.means) / self.stds
        y_mean = y.mean()
        A = Xs.T @ Xs + self.l2 * np.eye(X.shape[1])
        self.coef = np.linalg.solve(A, Xs.T @ (y - y_mean))
        self.intercept = float(y_mean)
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return ((X - self.means) / self.stds) @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {
            "kind": "ridge",
            "v": 1,
            "l2": self.l2,
            "coef": self.coef.tolist(),
            "intercept": self.intercept,
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RidgePredictor":
        rp = cls(d["l2"])
        rp.coef = np.asarray(d["coef"], dtype=float)
        rp.intercept = d["intercept"]
        rp.means = np.asarray(d["means"], dtype=float)
        rp.stds = np.asarray(d["stds"], dtype=float)
        return rp


# ---------------------------------------------------------------------------
# Ordinary least squares


@dataclass(frozen=True)
class OlsFit:
    coefficients: np.ndarray
    residuals: np.ndarray
    r_squared: float
    fitted: np.ndarray


def ols(design, response) -> OlsFit:
    """Minimum-norm least squares; rank-deficient designs go through the
    pseudo-inverse.  R-squared is centered (0 when the response has no
    variance around its mean)."""
    X = np.atleast_2d(np.asarray(design, dtype=float))
    y = np.asarray(response, dtype=float)
    if X.shape[0] == 0:
        raise ValidationError("empty design")
    if X.shape[0] < X.shape[1]:
        raise ValidationError("fewer rows than columns")
    coef, _, _, _ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ coef
    resid = y - fitted
    sst = float(np.sum((y - y.mean()) ** 2))
    ssr = float(np.sum(resid ** 2))
    r2 = 0.0 if sst <= 1e-300 else max(0.0, 1.0 - ssr / sst)
    return OlsFit(coefficients=coef, residuals=resid, r_squared=r2, fitted=fitted)
