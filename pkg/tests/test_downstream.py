import numpy as np
import pytest

from roofclass.fusion import (
    DownstreamSpec,
    SearchProtocol,
    enumerate_grid,
    fit_downstream,
    load_downstream,
    predict_downstream,
    records_from_matrix,
    sample_random,
    save_downstream,
    write_cv_table,
)
from roofclass.fusion.downstream import build_estimator


def separable_records(n=60, dim=8, k=2, seed=0, gap=6.0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, dim))
    y = np.arange(n) % k
    for c in range(k):
        x[y == c, 0] += gap * c
    return records_from_matrix([f"b{i}" for i in range(n)], x, "feature_concat", y)


SMALL_RF = [
    DownstreamSpec(family="RF", scaler="minmax", n_trees=100, max_depth=3, criterion="gini"),
    DownstreamSpec(family="RF", scaler="none", n_trees=150, max_depth=4, criterion="entropy"),
]


class TestSearchSpaces:
    def test_lr_grid_size_and_skips(self):
        grid = enumerate_grid("LR")
        assert len(grid) == 48  # 2*4*2*4 minus 16 l1+lbfgs combos
        assert len(grid) <= 64
        assert not any(s.penalty == "l1" and s.solver == "lbfgs" for s in grid)

    def test_svm_grid_size(self):
        assert len(enumerate_grid("SVM")) == 32  # 2*4*4

    def test_rf_random_draws_exactly_30_distinct(self):
        specs = sample_random("RF", 30, seed=0)
        assert len(specs) == 30
        assert len(set(specs)) == 30
        assert sample_random("RF", 30, seed=0) == specs
        assert sample_random("RF", 30, seed=1) != specs

    def test_rf_space_bounds(self):
        for spec in sample_random("RF", 100, seed=2):
            assert 100 <= spec.n_trees <= 1000 and spec.n_trees % 50 == 0
            assert 3 <= spec.max_depth <= 10
            assert spec.criterion in ("gini", "entropy")

    def test_spec_field_validation(self):
        with pytest.raises(ValueError):
            DownstreamSpec(family="LR", scaler="minmax", penalty="l1", C=1.0)  # no solver
        with pytest.raises(ValueError):
            DownstreamSpec(family="RF", scaler="minmax", n_trees=100, max_depth=5,
                           criterion="gini", C=1.0)
        with pytest.raises(ValueError):
            DownstreamSpec(family="SVM", scaler="minmax", penalty="l2", C=1.0, solver="lbfgs")


class TestFitDownstream:
    def test_separable_data_high_cv_f1(self):
        records = separable_records()
        fitted, best, table = fit_downstream(records, "LR", SearchProtocol(seed=0))
        assert table[[r["selected"] for r in table].index(True)]["mean_f1"] >= 0.99
        assert best.family == "LR"

    def test_cv_table_reproducible_byte_identical(self, tmp_path):
        records = separable_records(seed=3)
        paths = []
        for run in range(2):
            _, _, table = fit_downstream(records, "SVM", SearchProtocol(seed=7))
            p = tmp_path / f"cv_{run}.csv"
            write_cv_table(table, p)
            paths.append(p)
        assert paths[0].read_bytes() == paths[1].read_bytes()

    def test_rf_with_custom_candidates(self):
        records = separable_records(seed=4)
        fitted, best, table = fit_downstream(
            records, "RF", SearchProtocol(seed=1), candidates=SMALL_RF
        )
        assert len(table) == 2
        assert best in SMALL_RF

    def test_too_few_samples_per_class(self):
        records = separable_records(n=8, k=2)  # 4 per class < 5 folds
        with pytest.raises(ValueError, match="fewer samples than"):
            fit_downstream(records, "LR")

    def test_tie_break_prefers_simpler(self):
        # perfectly separable data gives many tied F1=1 rows; smallest C wins
        records = separable_records(gap=50.0)
        _, best, table = fit_downstream(records, "SVM", SearchProtocol(seed=2))
        top = max(r["mean_f1"] for r in table)
        tied = [r for r in table if r["mean_f1"] == top]
        if len(tied) > 1:
            assert best.C == min(r["C"] for r in tied)

    def test_refit_training_accuracy_close_to_cv(self):
        records = separable_records(seed=5, gap=3.0)
        fitted, _, table = fit_downstream(records, "LR", SearchProtocol(seed=3))
        preds = predict_downstream(fitted, records)
        y = np.array([r.label for r in records])
        train_acc = (preds == y).mean()
        cv_best = max(r["mean_f1"] for r in table)
        assert train_acc >= cv_best - 0.05


class TestPredictDownstream:
    def setup_method(self):
        self.records = separable_records(seed=6)
        self.fitted, _, _ = fit_downstream(
            self.records, "RF", SearchProtocol(seed=0), candidates=SMALL_RF
        )

    def test_single_record_in_range(self):
        pred = predict_downstream(self.fitted, self.records[:1])
        assert pred.shape == (1,)
        assert 0 <= pred[0] < 2

    def test_duplicated_record_identical(self):
        preds = predict_downstream(self.fitted, [self.records[0], self.records[0]])
        assert preds[0] == preds[1]

    def test_width_mismatch_rejected(self):
        bad = records_from_matrix(["z"], np.zeros((1, 3)), "feature_concat", [0])
        with pytest.raises(ValueError, match="width"):
            predict_downstream(self.fitted, bad)


class TestScaleInvarianceRF:
    def test_minmax_vs_raw_identical_predictions(self):
        rng = np.random.default_rng(9)
        x = rng.normal(size=(40, 5)) * np.array([1.0, 10.0, 100.0, 0.1, 5.0])
        y = (x[:, 0] + x[:, 3] > 0).astype(int)
        lo, span = x.min(axis=0), x.max(axis=0) - x.min(axis=0)
        x_scaled = (x - lo) / span

        spec = DownstreamSpec(family="RF", scaler="none", n_trees=100, max_depth=5, criterion="gini")
        a = build_estimator(spec, seed=0).fit(x, y).predict(x)
        b = build_estimator(spec, seed=0).fit(x_scaled, y).predict(x_scaled)
        assert np.array_equal(a, b)


class TestPersistence:
    def test_save_load_roundtrip(self, tmp_path):
        records = separable_records(seed=7)
        fitted, _, _ = fit_downstream(
            records,
            "LR",
            SearchProtocol(seed=4),
            candidates=[
                DownstreamSpec(family="LR", scaler="standard", penalty="l2", C=1.0, solver="lbfgs")
            ],
            layout={"blocks": [["rgb", 4], ["lidar", 4]]},
        )
        save_downstream(fitted, tmp_path / "clf")
        loaded = load_downstream(tmp_path / "clf")
        assert np.array_equal(predict_downstream(loaded, records), predict_downstream(fitted, records))
        assert loaded.layout == {"blocks": [["rgb", 4], ["lidar", 4]]}
        assert loaded.spec == fitted.spec
