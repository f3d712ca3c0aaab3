import dataclasses
import math

import numpy as np
import pytest

import confjudge as cj
from confjudge.conformal import (
    _chr_level_runs,
    _lvd_local_quantiles,
    _ordinal_growth_predict,
    _superlevel_interval,
    predict_intervals_flagged,
)
from confjudge.core import (
    Dataset,
    JudgeSample,
    LabelScale,
    ValidationError,
    conformal_quantile,
)

LIKERT = LabelScale(1, 5, 1)
FINE = LabelScale(1, 5, 0.002)

SMALL_HYPER = {
    "cqr": {"n_trees": 30, "depth": 2, "min_leaf": 15, "lr": 0.1},
    "asym_cqr": {"n_trees": 30, "depth": 2, "min_leaf": 15, "lr": 0.1},
    "chr": {"epochs": 120},
    "r2ccp": {"epochs": 120},
}


def build_dataset(Z, raw, labels, scale=LIKERT, prefix="d"):
    samples = tuple(
        JudgeSample(f"{prefix}{i}", tuple(Z[i]), float(raw[i]), float(labels[i]))
        for i in range(len(labels))
    )
    return Dataset(samples, scale, Z.shape[1])


def peaked_split(seed=11, n=600, scale=LIKERT, sigma=0.6):
    ds, _ = cj.generate(cj.GeneratorSpec(seed=seed, n=n, noise=cj.Homoscedastic(sigma), scale=scale))
    return cj.split(ds, cj.SplitSpec(seed))


def calibrate_all(train, calib, alpha=0.1):
    models = {}
    for m in cj.METHODS:
        kw = {"point_predictor": "ridge"} if m == "split_abs" else {}
        models[m] = cj.calibrate(m, train, calib, alpha, SMALL_HYPER.get(m), **kw)
    return models


class TestSplitAbs:
    def test_zero_residuals_degenerate_interval(self):
        rng = np.random.default_rng(0)
        Z = rng.normal(size=(20, 5))
        raw = rng.choice([2.0, 3.0, 4.0], size=20)
        ds = build_dataset(Z, raw, raw)
        model = cj.calibrate_split_abs(ds, ds, 0.1)
        iv = cj.predict_interval(model, Z[0], y_hat=3.0)
        assert (iv.lo, iv.hi) == (3.0, 3.0)

    def test_unit_residuals(self):
        rng = np.random.default_rng(1)
        Z = rng.normal(size=(4, 5))
        raw = np.array([2.0, 3.0, 4.0, 5.0])
        ds = build_dataset(Z, raw, raw - 1.0)
        model = cj.calibrate_split_abs(ds, ds, 0.1)
        assert model.qhat == 1.0
        iv = cj.predict_interval(model, Z[0], y_hat=3.0)
        assert (iv.lo, iv.hi) == (2.0, 4.0)

    def test_clamped_to_scale(self):
        rng = np.random.default_rng(2)
        Z = rng.normal(size=(4, 5))
        raw = np.array([2.0, 3.0, 4.0, 5.0])
        ds = build_dataset(Z, raw, raw - 1.0)
        model = cj.calibrate_split_abs(ds, ds, 0.1)
        iv = cj.predict_interval(model, Z[0], y_hat=5.0)
        assert (iv.lo, iv.hi) == (4.0, 5.0)

    def test_other_point_predictors(self):
        train, calib, test = peaked_split()
        for pp in ("weighted_average", "ridge"):
            model = cj.calibrate_split_abs(train, calib, 0.1, point_predictor=pp)
            ivals = cj.predict_intervals(model, test.logits)
            assert all(iv.lo <= iv.hi for iv in ivals)
        with pytest.raises(ValidationError, match="point predictor"):
            cj.calibrate_split_abs(train, calib, 0.1, point_predictor="mean")


class TestCqr:
    def test_constant_labels_zero_width(self):
        rng = np.random.default_rng(3)
        Z = rng.normal(size=(40, 5))
        ds = build_dataset(Z, np.full(40, 3.0), np.full(40, 3.0))
        model = cj.calibrate_cqr(ds, ds, 0.1, {"n_trees": 10})
        ivals = cj.predict_intervals(model, Z)
        assert all(iv.width == pytest.approx(0.0, abs=1e-9) for iv in ivals)

    def test_oracle_quantiles_give_small_correction(self):
        # constant conditional distribution: the n_trees=0 forest is the
        # empirical tau-quantile, which converges to the true quantile, so
        # the conformal correction should vanish
        rng = np.random.default_rng(4)
        n = 3000
        y = 3.0 + 0.5 * rng.standard_normal(n)
        y = np.clip(np.round((y - 1.0) / 0.002) * 0.002 + 1.0, 1.0, 5.0)
        Z = rng.normal(size=(n, 5))
        raw = np.full(n, 3.0)
        ds = build_dataset(Z, raw, y, scale=FINE)
        train, calib, test = cj.split(ds, cj.SplitSpec(4))
        model = cj.calibrate_cqr(train, calib, 0.1, {"n_trees": 0})
        assert abs(model.qhat) < 0.1
        iv = cj.predict_interval(model, test.logits[0])
        assert iv.lo == pytest.approx(3.0 - 0.5 * 1.6449, abs=0.15)
        assert iv.hi == pytest.approx(3.0 + 0.5 * 1.6449, abs=0.15)


class TestAsymCqr:
    def test_symmetric_data_balanced_corrections(self):
        rng = np.random.default_rng(5)
        n = 3000
        y = 3.0 + 0.5 * rng.standard_normal(n)
        y = np.clip(np.round((y - 1.0) / 0.002) * 0.002 + 1.0, 1.0, 5.0)
        Z = rng.normal(size=(n, 5))
        ds = build_dataset(Z, np.full(n, 3.0), y, scale=FINE)
        train, calib, _ = cj.split(ds, cj.SplitSpec(5))
        model = cj.calibrate_asym_cqr(train, calib, 0.1, {"n_trees": 0})
        q_lo, q_hi = model.qhat
        assert abs(q_lo - q_hi) < 0.15

    def test_constant_labels_zero_width(self):
        rng = np.random.default_rng(6)
        Z = rng.normal(size=(30, 5))
        ds = build_dataset(Z, np.full(30, 4.0), np.full(30, 4.0))
        model = cj.calibrate_asym_cqr(ds, ds, 0.1, {"n_trees": 5})
        ivals = cj.predict_intervals(model, Z)
        assert all(iv.width == pytest.approx(0.0, abs=1e-9) for iv in ivals)


class TestChrFamily:
    def test_point_mass_stays_single_bin(self):
        probs = np.zeros((1, 5))
        probs[0, 2] = 1.0
        levels, run_lo, run_hi = _chr_level_runs(probs, 100)
        assert np.all(run_lo[levels[0]] == 2)
        assert np.all(run_hi[levels[0]] == 2)

    def test_uniform_needs_all_bins_at_level_09(self):
        probs = np.full((1, 5), 0.2)
        levels, run_lo, run_hi = _chr_level_runs(probs, 100)
        r = levels[0, 90]
        assert run_hi[r] - run_lo[r] + 1 == 5

    def test_nested_over_random_simplex_draws(self):
        rng = np.random.default_rng(7)
        probs = rng.dirichlet(np.ones(5) * 0.4, size=1000)
        levels, run_lo, run_hi = _chr_level_runs(probs, 100)
        lo = run_lo[levels]
        hi = run_hi[levels]
        assert np.all(np.diff(lo, axis=1) <= 0)
        assert np.all(np.diff(hi, axis=1) >= 0)

    def test_end_to_end_grid_endpoints(self):
        train, calib, test = peaked_split()
        model = cj.calibrate_chr(train, calib, 0.1, SMALL_HYPER["chr"])
        ivals = cj.predict_intervals(model, test.logits)
        for iv in ivals[:50]:
            assert LIKERT.on_grid(iv.lo) and LIKERT.on_grid(iv.hi)


class TestLvd:
    def test_uniform_weights_reduce_to_global_quantile(self):
        train, calib, test = peaked_split()
        model = cj.calibrate_lvd(train, calib, 0.1, {"bandwidth": 1e9})
        scores = np.sort(model.calib_scores)
        expected = scores[math.ceil(0.9 * len(scores)) - 1]
        qs = _lvd_local_quantiles(model, test.logits[:20])
        np.testing.assert_allclose(qs, expected, atol=1e-9)

    def test_all_weight_on_one_point(self):
        train, calib, _ = peaked_split()
        model = cj.calibrate_lvd(train, calib, 0.1, {"bandwidth": 1e-6})
        j = 13
        iv = cj.predict_interval(model, calib.logits[j])
        ridge = cj.RidgePredictor.from_dict(model.state["ridge"])
        pred = ridge.predict(calib.logits[j:j + 1])[0]
        half = (iv.hi - iv.lo) / 2
        # clamping can cut one side; the uncut side sits at the local score
        assert max(iv.hi - pred, pred - iv.lo) == pytest.approx(model.calib_scores[j], abs=1e-9)
        assert half <= model.calib_scores[j] + 1e-9

    def test_local_coverage_beats_global_on_two_region_noise(self):
        wins = 0
        trials = 50
        for trial in range(trials):
            ds, oracle = cj.generate(
                cj.GeneratorSpec(seed=1000 + trial, n=1200, noise=cj.Heteroscedastic(1.0)))
            train, calib, test = cj.split(ds, cj.SplitSpec(trial + 1, 2 / 3, 1 / 4))
            test_idx = np.array([int(s.id[1:]) for s in test.samples])
            region = oracle.regions()[test_idx]
            devs = {}
            for m in ("lvd", "split_abs"):
                kw = {"point_predictor": "ridge"} if m == "split_abs" else {}
                hyper = {"bandwidth": 1.0} if m == "lvd" else None
                model = cj.calibrate(m, train, calib, 0.1, hyper, **kw)
                ivl = cj.predict_intervals(model, test.logits, test.raw_scores)
                cov = np.array([i.covers(y) for i, y in zip(ivl, test.labels)])
                devs[m] = max(abs(cov[region].mean() - 0.9), abs(cov[~region].mean() - 0.9))
            wins += devs["lvd"] < devs["split_abs"]
        assert wins >= 0.8 * trials


class TestR2ccp:
    def test_uniform_density_gives_full_range(self):
        rng = np.random.default_rng(8)
        Z = rng.normal(size=(40, 5))
        y = rng.choice(LIKERT.labels(), size=40)
        ds = build_dataset(Z, y, y)
        model = cj.calibrate_r2ccp(ds, ds, 0.1, {"epochs": 0})
        ivals = cj.predict_intervals(model, Z)
        assert all((iv.lo, iv.hi) == (1.0, 5.0) for iv in ivals)

    def test_two_modes_merge_to_spanning_interval(self):
        bins = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        dens = np.array([0.4, 0.05, 0.1, 0.05, 0.4])
        lo, hi = _superlevel_interval(bins, dens, 0.3, LIKERT)
        assert (lo, hi) == (1.0, 5.0)

    def test_merged_interval_contains_every_superlevel_point(self):
        rng = np.random.default_rng(9)
        bins = LIKERT.labels()
        grid = np.linspace(1, 5, 401)
        for _ in range(1000):
            dens = rng.dirichlet(np.ones(5) * 0.5)
            q = rng.uniform(0, dens.max())
            span = _superlevel_interval(bins, dens, q, LIKERT)
            assert span is not None
            lo, hi = span
            f = np.interp(grid, bins, dens)
            above = grid[f >= q]
            assert above.min() >= lo - 1e-9 and above.max() <= hi + 1e-9

    def test_degenerate_fallback_flagged(self):
        rng = np.random.default_rng(10)
        Z = rng.normal(size=(30, 5))
        y = rng.choice(LIKERT.labels(), size=30)
        ds = build_dataset(Z, y, y)
        model = cj.calibrate_r2ccp(ds, ds, 0.1, {"epochs": 30})
        forced = dataclasses.replace(model, qhat=1e9)
        ivals, flags = predict_intervals_flagged(forced, Z)
        assert all(f == "degenerate" for f in flags)
        assert all(iv.width == 0.0 and LIKERT.on_grid(iv.lo) for iv in ivals)

    def test_density_uses_bin_width(self):
        thirds = LabelScale(1, 5, 1 / 3)
        rng = np.random.default_rng(11)
        Z = rng.normal(size=(40, 5))
        y = rng.choice(thirds.labels(), size=40)
        raw = rng.choice([1.0, 2.0, 3.0, 4.0, 5.0], size=40)
        ds = build_dataset(Z, raw, y, scale=thirds)
        model = cj.calibrate_r2ccp(ds, ds, 0.1, {"epochs": 0})
        # uniform over 13 bins of width 1/3: density 3/13 everywhere
        assert model.calib_scores[0] == pytest.approx(3 / 13, abs=1e-9)


class TestOrdinal:
    def test_point_mass_single_label(self):
        Z = np.tile(np.array([-1000.0, -1000.0, 0.0, -1000.0, -1000.0]), (20, 1))
        ds = build_dataset(Z, np.full(20, 3.0), np.full(20, 3.0))
        for alpha in (0.05, 0.1, 0.3):
            model = cj.calibrate_ordinal_aps(ds, alpha)
            iv = cj.predict_interval(model, Z[0])
            assert (iv.lo, iv.hi) == (3.0, 3.0)

    def test_greedy_growth_example(self):
        values = np.array([[0.5, 0.3, 0.2, 0.0, 0.0]])
        left, right = _ordinal_growth_predict(values, np.arange(1.0, 6.0), 0.75)
        assert (left[0], right[0]) == (0, 1)

    def test_contiguity_and_argmax_containment(self):
        rng = np.random.default_rng(12)
        probs = rng.dirichlet(np.ones(5) * 0.4, size=1000)
        qhats = rng.uniform(0.05, 1.0, size=1000)
        for p, q in zip(probs, qhats):
            left, right = _ordinal_growth_predict(p[None, :], np.arange(1.0, 6.0), q)
            peak = int(np.argmax(p))
            assert left[0] <= peak <= right[0]
            mass = p[left[0]:right[0] + 1].sum()
            assert mass >= q - 1e-9 or (left[0], right[0]) == (0, 4)

    def test_rc_with_unit_weights_identical_to_aps(self):
        train, calib, test = peaked_split(seed=21)
        aps = cj.calibrate_ordinal_aps(calib, 0.1)
        rc = cj.calibrate_ordinal_rc(calib, 0.1, np.ones(5))
        assert rc.qhat == aps.qhat
        np.testing.assert_array_equal(rc.calib_scores, aps.calib_scores)
        iv_a = cj.predict_intervals(aps, test.logits)
        iv_r = cj.predict_intervals(rc, test.logits)
        assert [(a.lo, a.hi) for a in iv_a] == [(r.lo, r.hi) for r in iv_r]

    def test_weighted_growth_hand_simulation(self):
        # uniform probabilities, double weight on label 1: start at label 1,
        # first growth step adds label 2 (0.4 then 0.6 >= 0.5)
        values = np.full((1, 5), 0.2) * np.array([2.0, 1.0, 1.0, 1.0, 1.0])
        left, right = _ordinal_growth_predict(values, np.arange(1.0, 6.0), 0.5)
        assert (left[0], right[0]) == (0, 1)
        # same probabilities, double weight on label 4: start there, then one
        # tie-broken step toward the lower label (0.4, then 0.4 + 0.2 >= 0.5)
        values = np.full((1, 5), 0.2) * np.array([1.0, 1.0, 1.0, 2.0, 1.0])
        left, right = _ordinal_growth_predict(values, np.arange(1.0, 6.0), 0.5)
        assert (left[0], right[0]) == (2, 3)

    def test_non_positive_weight_rejected(self):
        _, calib, _ = peaked_split(seed=22)
        with pytest.raises(ValidationError, match="positive"):
            cj.calibrate_ordinal_rc(calib, 0.1, [1.0, 0.0, 1.0, 1.0, 1.0])


@pytest.fixture(scope="module")
def fitted():
    train, calib, test = peaked_split(seed=31, n=400)
    return train, calib, test, calibrate_all(train, calib)


class TestModelContract:
    def test_scores_reproduce_calibration(self, fitted):
        _, calib, _, models = fitted
        for name, model in models.items():
            again = cj.score_samples(model, calib)
            np.testing.assert_allclose(again, model.calib_scores, atol=1e-9, err_msg=name)

    def test_deterministic_prediction(self, fitted):
        _, _, test, models = fitted
        for model in models.values():
            a = cj.predict_intervals(model, test.logits, test.raw_scores)
            b = cj.predict_intervals(model, test.logits, test.raw_scores)
            assert [(x.lo, x.hi) for x in a] == [(x.lo, x.hi) for x in b]

    def test_clamped_and_ordered(self, fitted):
        _, _, test, models = fitted
        for model in models.values():
            for iv in cj.predict_intervals(model, test.logits, test.raw_scores):
                assert 1.0 - 1e-9 <= iv.lo <= iv.hi <= 5.0 + 1e-9

    def test_dimension_mismatch(self, fitted):
        _, _, _, models = fitted
        with pytest.raises(ValidationError, match="dimensional"):
            cj.predict_interval(models["cqr"], np.zeros(4))

    def test_serialization_roundtrip(self, fitted):
        _, _, test, models = fitted
        for name, model in models.items():
            back = cj.model_from_json(cj.model_to_json(model))
            iv_a = cj.predict_intervals(model, test.logits, test.raw_scores)
            iv_b = cj.predict_intervals(back, test.logits, test.raw_scores)
            assert [(x.lo, x.hi) for x in iv_a] == [(x.lo, x.hi) for x in iv_b], name

    def test_alpha_validated(self, fitted):
        _, _, _, models = fitted
        with pytest.raises(ValidationError):
            dataclasses.replace(models["cqr"], alpha=1.5)

    def test_unknown_method_lists_valid_names(self, fitted):
        train, calib, _, _ = fitted[0], fitted[1], fitted[2], fitted[3]
        with pytest.raises(ValidationError, match="split_abs"):
            cj.calibrate("quantile", train, calib, 0.1)


class TestWidthMonotoneInAlpha:
    def test_structurally_nested_methods(self):
        train, calib, test = peaked_split(seed=41, n=500)
        for m in ("split_abs", "chr", "lvd", "r2ccp", "ordinal_aps", "ordinal_rc"):
            kw = {"point_predictor": "ridge"} if m == "split_abs" else {}
            tight = cj.calibrate(m, train, calib, 0.05, SMALL_HYPER.get(m), **kw)
            loose = cj.calibrate(m, train, calib, 0.20, SMALL_HYPER.get(m), **kw)
            iv_t = cj.predict_intervals(tight, test.logits, test.raw_scores)
            iv_l = cj.predict_intervals(loose, test.logits, test.raw_scores)
            for a, b in zip(iv_t, iv_l):
                assert a.lo <= b.lo + 1e-9 and a.hi >= b.hi - 1e-9, m

    def test_cqr_nests_with_shared_estimator(self):
        # the conformal correction is monotone in alpha once the fitted
        # quantile estimator is held fixed; independently refit forests at
        # different tau levels are not pointwise ordered
        train, calib, test = peaked_split(seed=43, n=500)
        for m in ("cqr", "asym_cqr"):
            model = cj.calibrate(m, train, calib, 0.05, SMALL_HYPER[m])
            if m == "cqr":
                q_tight = model.qhat
                q_loose = conformal_quantile(model.calib_scores, 0.20)
                assert q_tight >= q_loose
            else:
                q_tight = model.qhat
                q_loose = (
                    conformal_quantile(model.calib_scores[:, 0], 0.10),
                    conformal_quantile(model.calib_scores[:, 1], 0.10),
                )
                assert q_tight[0] >= q_loose[0] and q_tight[1] >= q_loose[1]
            loose = dataclasses.replace(model, alpha=0.20, qhat=q_loose)
            iv_t = cj.predict_intervals(model, test.logits, test.raw_scores)
            iv_l = cj.predict_intervals(loose, test.logits, test.raw_scores)
            for a, b in zip(iv_t, iv_l):
                assert a.lo <= b.lo + 1e-9 and a.hi >= b.hi - 1e-9, m


class TestNoEmptyBeforeAdjustment:
    def test_every_method_returns_nonempty(self):
        train, calib, test = peaked_split(seed=51, n=400)
        for m, model in calibrate_all(train, calib).items():
            for iv in cj.predict_intervals(model, test.logits, test.raw_scores):
                assert not iv.empty, m
