"""Coverage/width evaluation over seeds, midpoint scoring comparisons,
heteroscedasticity tests, calibration-size sweeps, and the human baseline.

Coverage counts use closed intervals (a label exactly on an endpoint is
covered) and an empty interval covers nothing; the nearest-label fallback
for shrink-emptied intervals enters width and midpoint accounting only.
All aggregation is deterministic: cells are keyed by (method, seed) and
reduced in sorted order.
"""

from __future__ import annotations

import concurrent.futures
import statistics
from dataclasses import dataclass, field

import numpy as np

from . import conformal
from .adjust import AdjustmentPolicy, adjust, fallback_label, midpoint
from .core import Dataset, SplitSpec, ValidationError, conformal_quantile, split
from .estimators import ols
from .ratings import weighted_average
from .special import chi2_sf, f_sf

__all__ = [
    "EvalRow",
    "EvalReport",
    "MidpointRow",
    "HetTestResult",
    "evaluate",
    "midpoint_report",
    "bp_test",
    "white_test",
    "calibration_sweep",
    "human_baseline",
    "weighted_average",
    "mse",
    "mae",
    "pearson",
    "spearman",
    "kendall_tau_b",
    "write_eval_csv",
    "write_midpoints_csv",
    "write_het_csv",
    "write_sweep_csv",
]


# ---------------------------------------------------------------------------
# Metrics


def mse(pred, truth) -> float:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    return float(np.mean((p - t) ** 2))


def mae(pred, truth) -> float:
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    return float(np.mean(np.abs(p - t)))


def pearson(x, y) -> float:
    """Pearson correlation; 0 when either side has no variance."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xd = x - x.mean()
    yd = y - y.mean()
    denom = np.sqrt((xd ** 2).sum() * (yd ** 2).sum())
    if denom <= 1e-300:
        return 0.0
    return float((xd * yd).sum() / denom)


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j < len(x) and sx[j] == sx[i]:
            j += 1
        ranks[order[i:j]] = 0.5 * (i + j - 1) + 1.0
        i = j
    return ranks


def spearman(x, y) -> float:
    """Spearman rho: Pearson on mid-ranks (ties get average ranks)."""
    return pearson(_midranks(np.asarray(x, dtype=float)), _midranks(np.asarray(y, dtype=float)))


def kendall_tau_b(x, y) -> float:
    """Tie-corrected Kendall tau; rating data is tie-heavy so the b variant
    is the meaningful one.  Returns 0 when either margin is all ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    concordant_minus_discordant = float((dx * dy).sum()) / 2.0
    n0 = n * (n - 1) / 2.0
    ties_x = (np.count_nonzero(dx == 0) - n) / 2.0
    ties_y = (np.count_nonzero(dy == 0) - n) / 2.0
    denom = np.sqrt((n0 - ties_x) * (n0 - ties_y))
    if denom <= 1e-300:
        return 0.0
    return concordant_minus_discordant / denom


# ---------------------------------------------------------------------------
# Seeded evaluation


@dataclass(frozen=True)
class EvalRow:
    method: str
    seed: int
    policy: str
    mean_width: float
    coverage: float

    def __post_init__(self):
        if not 0.0 <= self.coverage <= 1.0:
            raise ValidationError("coverage must lie in [0, 1]")
        if self.mean_width < 0.0:
            raise ValidationError("mean width must be >= 0")


@dataclass
class EvalReport:
    rows: list
    aggregates: dict
    errors: dict = field(default_factory=dict)
    empty_intervals: int = 0
    degenerate_intervals: int = 0
    excluded: int = 0


def _policy_name(policy: AdjustmentPolicy | None) -> str:
    if policy is None:
        return "none"
    if policy.kind == "nearest":
        return f"nearest({policy.lam:g})"
    return policy.kind


def _coverage_width(intervals, labels):
    covered = 0
    widths = []
    empties = 0
    for iv, y in zip(intervals, labels):
        if iv.empty:
            empties += 1
            widths.append(0.0)
            continue
        widths.append(iv.width)
        if iv.covers(y):
            covered += 1
    return covered / len(labels), float(np.mean(widths)), empties


def _eval_cell(args):
    (dataset, method, seed, alpha, policy, calib_fraction, inner_train_fraction,
     hyper, point_predictor) = args
    train, calib, test = split(dataset, SplitSpec(seed, calib_fraction, inner_train_fraction))
    kw = {}
    if method == "split_abs":
        kw["point_predictor"] = point_predictor
    model = conformal.calibrate(method, train, calib, alpha, hyper, **kw)
    intervals, flags = conformal.predict_intervals_flagged(model, test.logits, test.raw_scores)
    degenerate = sum(1 for f in flags if f)
    if policy is not None:
        adjusted = [adjust(iv, dataset.scale, policy) for iv in intervals]
    else:
        adjusted = intervals
    coverage, mean_width, empties = _coverage_width(adjusted, test.labels)
    return EvalRow(method, seed, _policy_name(policy), mean_width, coverage), empties, degenerate


def evaluate(dataset: Dataset, methods, seeds, alpha: float = 0.1,
             policy: AdjustmentPolicy | None = None, calib_fraction: float = 0.5,
             inner_train_fraction: float = 0.5, hyper: dict | None = None,
             point_predictor: str = "raw_score", jobs: int = 1,
             excluded: int = 0) -> EvalReport:
    """Split/calibrate/predict each (method, seed) cell and aggregate
    width and coverage.  A failing cell is recorded and skipped rather than
    aborting the run.  ``hyper`` maps method name to a hyperparameter dict.
    """
    methods = list(methods)
    seeds = list(seeds)
    if not seeds:
        raise ValidationError("need at least one seed")
    for m in methods:
        if m not in conformal.METHODS:
            raise ValidationError(f"unknown method {m!r}; valid: {', '.join(conformal.METHODS)}")
    cells = [
        (dataset, m, s, alpha, policy, calib_fraction, inner_train_fraction,
         (hyper or {}).get(m), point_predictor)
        for m in methods for s in seeds
    ]
    results = {}
    errors = {}
    empties = 0
    degenerates = 0
    if jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(_eval_cell, c): (c[1], c[2]) for c in cells}
            for fut in concurrent.futures.as_completed(futures):
                key = futures[fut]
                try:
                    row, n_empty, n_degen = fut.result()
                    results[key] = row
                    empties += n_empty
                    degenerates += n_degen
                except Exception as exc:
                    errors[key] = str(exc)
    else:
        for c in cells:
            key = (c[1], c[2])
            try:
                row, n_empty, n_degen = _eval_cell(c)
                results[key] = row
                empties += n_empty
                degenerates += n_degen
            except Exception as exc:
                errors[key] = str(exc)

    rows = [results[k] for k in sorted(results)]
    aggregates = {}
    for m in methods:
        widths = [r.mean_width for r in rows if r.method == m]
        covs = [r.coverage for r in rows if r.method == m]
        if widths:
            aggregates[m] = {
                "mean_width": statistics.fmean(widths),
                "std_width": statistics.pstdev(widths) if len(widths) > 1 else 0.0,
                "mean_coverage": statistics.fmean(covs),
                "std_coverage": statistics.pstdev(covs) if len(covs) > 1 else 0.0,
            }
    return EvalReport(rows, aggregates, errors, empties, degenerates, excluded)


# ---------------------------------------------------------------------------
# Midpoint scoring comparison


@dataclass(frozen=True)
class MidpointRow:
    scorer: str
    mse: float
    mae: float
    pearson: float
    spearman: float
    kendall: float
    flagged: bool = False


_SCORERS = ("raw_score", "weighted_avg", "con_midpoint", "dis_midpoint")


def midpoint_report(dataset: Dataset, seeds, alpha: float = 0.1,
                    calib_fraction: float = 0.5, inner_train_fraction: float = 0.5,
                    hyper: dict | None = None) -> list:
    """Compare point scorers against human labels on the test split,
    averaged over seeds.  The interval scorers come from the density-based
    method: con = midpoint before boundary adjustment, dis = after full
    nearest adjustment (shrink-emptied intervals fall back to the nearest
    label)."""
    seeds = list(seeds)
    if not seeds:
        raise ValidationError("need at least one seed")
    full = AdjustmentPolicy.full(dataset.scale)
    sums = {s: np.zeros(5) for s in _SCORERS}
    flagged = {s: False for s in _SCORERS}
    for seed in seeds:
        train, calib, test = split(dataset, SplitSpec(seed, calib_fraction, inner_train_fraction))
        model = conformal.calibrate("r2ccp", train, calib, alpha, hyper)
        intervals = conformal.predict_intervals(model, test.logits)
        con = np.array([midpoint(iv) for iv in intervals])
        dis = []
        for iv in intervals:
            adj = adjust(iv, dataset.scale, full)
            dis.append(fallback_label(iv, dataset.scale) if adj.empty else midpoint(adj))
        preds = {
            "raw_score": test.raw_scores,
            "weighted_avg": weighted_average(test.logits, dataset.scale),
            "con_midpoint": con,
            "dis_midpoint": np.array(dis),
        }
        for name, p in preds.items():
            if float(np.std(p)) <= 1e-12:
                flagged[name] = True
            sums[name] += np.array([
                mse(p, test.labels),
                mae(p, test.labels),
                pearson(p, test.labels),
                spearman(p, test.labels),
                kendall_tau_b(p, test.labels),
            ])
    rows = []
    for name in _SCORERS:
        v = sums[name] / len(seeds)
        rows.append(MidpointRow(name, v[0], v[1], v[2], v[3], v[4], flagged[name]))
    return rows


# ---------------------------------------------------------------------------
# Heteroscedasticity tests


@dataclass(frozen=True)
class HetTestResult:
    lm_stat: float
    lm_p: float
    f_stat: float
    f_p: float
    df: int


def _lm_from_aux(Z_aux: np.ndarray, sq_resid: np.ndarray) -> HetTestResult:
    n, k = Z_aux.shape
    if n <= k + 1:
        raise ValidationError("need more observations than auxiliary regressors")
    design = np.column_stack([np.ones(n), Z_aux])
    aux = ols(design, sq_resid)
    r2 = aux.r_squared
    lm = n * r2
    f_stat = (r2 / k) / ((1.0 - r2) / (n - k - 1)) if r2 < 1.0 else float("inf")
    return HetTestResult(lm, chi2_sf(lm, k), f_stat, f_sf(f_stat, k, n - k - 1), k)


def bp_test(features, labels) -> HetTestResult:
    """Breusch-Pagan: regress squared OLS residuals on the covariates;
    LM = n * R-squared is asymptotically chi-square with k degrees of
    freedom, and the auxiliary regression's F statistic accompanies it."""
    Z = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float)
    n = Z.shape[0]
    base = ols(np.column_stack([np.ones(n), Z]), y)
    return _lm_from_aux(Z, base.residuals ** 2)


def _white_design(Z: np.ndarray) -> np.ndarray:
    n, k = Z.shape
    cols = [Z[:, j] for j in range(k)]
    cols += [Z[:, j] ** 2 for j in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            cols.append(Z[:, i] * Z[:, j])
    V = np.column_stack(cols)
    # constant or duplicate expanded columns are dropped (m shrinks with them)
    keep = []
    for j in range(V.shape[1]):
        c = V[:, j]
        if np.std(c) <= 1e-12:
            continue
        duplicate = False
        for kept in keep:
            d = V[:, kept]
            if np.allclose(c, d, rtol=1e-10, atol=1e-12):
                duplicate = True
                break
        if not duplicate:
            keep.append(j)
    if not keep:
        raise ValidationError("degenerate White design")
    return V[:, keep]


def white_test(features, labels) -> HetTestResult:
    """White test: the auxiliary design adds squares and cross products of
    the covariates before the LM statistic is formed."""
    Z = np.atleast_2d(np.asarray(features, dtype=float))
    y = np.asarray(labels, dtype=float)
    n = Z.shape[0]
    base = ols(np.column_stack([np.ones(n), Z]), y)
    return _lm_from_aux(_white_design(Z), base.residuals ** 2)


# ---------------------------------------------------------------------------
# Calibration-size sweep


@dataclass(frozen=True)
class SweepRow:
    fraction: float
    mean_coverage: float
    std_coverage: float
    skipped: bool = False


def _subsample(ds: Dataset, fraction: float, rng) -> Dataset:
    if fraction >= 1.0:
        return ds
    m = int(round(fraction * len(ds)))
    idx = np.sort(rng.choice(len(ds), size=m, replace=False))
    return ds.subset(idx)


def calibration_sweep(dataset: Dataset, method: str, seeds, fractions,
                      alpha: float = 0.1, calib_fraction: float = 0.5,
                      inner_train_fraction: float = 0.5, hyper: dict | None = None,
                      point_predictor: str = "raw_score") -> list:
    """Coverage mean and std per calibration fraction.  Each seed's pool is
    subsampled (seeded by seed and fraction), recalibrated, and evaluated on
    the untouched test split; fractions that leave fewer than 5 calibration
    points are flagged and skipped."""
    rows = []
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise ValidationError("fractions must lie in (0, 1]")
        covs = []
        skipped = False
        for seed in seeds:
            train, calib, test = split(dataset, SplitSpec(seed, calib_fraction, inner_train_fraction))
            rng = np.random.default_rng([seed, int(round(fraction * 1_000_000))])
            train_s = _subsample(train, fraction, rng)
            calib_s = _subsample(calib, fraction, rng)
            if len(calib_s) < 5:
                skipped = True
                break
            kw = {"point_predictor": point_predictor} if method == "split_abs" else {}
            model = conformal.calibrate(method, train_s, calib_s, alpha, hyper, **kw)
            intervals = conformal.predict_intervals(model, test.logits, test.raw_scores)
            covered = sum(iv.covers(y) for iv, y in zip(intervals, test.labels))
            covs.append(covered / len(test))
        if skipped or not covs:
            rows.append(SweepRow(fraction, float("nan"), float("nan"), skipped=True))
        else:
            rows.append(SweepRow(
                fraction,
                statistics.fmean(covs),
                statistics.pstdev(covs) if len(covs) > 1 else 0.0,
            ))
    return rows


# ---------------------------------------------------------------------------
# Human annotator baseline


def human_baseline(annotations, alpha: float = 0.1, seeds=(1,), calib_fraction: float = 0.5):
    """Split-absolute conformal intervals around one randomly chosen
    annotation per item, scored against the annotation mean.  Intervals are
    [pick - qhat, pick + qhat] without clamping, so the width is 2 * qhat."""
    ann = [np.asarray(a, dtype=float) for a in annotations]
    if any(len(a) < 2 for a in ann):
        raise ValidationError("need at least two annotations per sample")
    n = len(ann)
    if n < 4:
        raise ValidationError("need at least four annotated samples")
    truth = np.array([a.mean() for a in ann])
    rows = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        picks = np.array([a[rng.integers(len(a))] for a in ann])
        perm = rng.permutation(n)
        n_cal = int(round(calib_fraction * n))
        cal, test = perm[:n_cal], perm[n_cal:]
        if len(cal) == 0 or len(test) == 0:
            raise ValidationError("degenerate split")
        qhat = conformal_quantile(np.abs(picks[cal] - truth[cal]), alpha)
        covered = np.abs(picks[test] - truth[test]) <= qhat + 1e-9
        rows.append(EvalRow("human_baseline", seed, "none", 2.0 * qhat, float(np.mean(covered))))
    return rows


# ---------------------------------------------------------------------------
# CSV output (floats fixed to 6 decimals)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def write_eval_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,seed,policy,mean_width,coverage\n")
        for r in rows:
            fh.write(f"{r.method},{r.seed},{r.policy},{_fmt(r.mean_width)},{_fmt(r.coverage)}\n")


def write_midpoints_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("scorer,mse,mae,pearson,spearman,kendall,flagged\n")
        for r in rows:
            fh.write(
                f"{r.scorer},{_fmt(r.mse)},{_fmt(r.mae)},{_fmt(r.pearson)},"
                f"{_fmt(r.spearman)},{_fmt(r.kendall)},{int(r.flagged)}\n"
            )


def write_het_csv(path, entries) -> None:
    """``entries`` is a list of (dimension, test_name, HetTestResult)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("dimension,test,lm_stat,lm_p,f_stat,f_p\n")
        for dim, name, res in entries:
            fh.write(
                f"{dim},{name},{_fmt(res.lm_stat)},{_fmt(res.lm_p)},"
                f"{_fmt(res.f_stat)},{_fmt(res.f_p)}\n"
            )


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("fraction,mean_coverage,std_coverage\n")
        for r in rows:
            fh.write(f"{_fmt(r.fraction)},{_fmt(r.mean_coverage)},{_fmt(r.std_coverage)}\n")
