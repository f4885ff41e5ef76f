import numpy as np
import pytest

from roofclass.metrics import (
    ConfusionMatrix,
    confusion_matrix,
    evaluate,
    format_report_table,
    macro_metrics,
    MetricsReport,
)


def ovr_reference(counts):
    """Independent one-vs-rest oracle: per-class loops, no shared code path."""
    counts = np.asarray(counts, dtype=float)
    k = counts.shape[0]
    total = counts.sum()
    precision, recall, f1, acc = [], [], [], []
    for c in range(k):
        tp = counts[c, c]
        fp = sum(counts[r, c] for r in range(k) if r != c)
        fn = sum(counts[c, r] for r in range(k) if r != c)
        tn = total - tp - fp - fn
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(2 * p * r / (p + r) if p + r > 0 else 0.0)
        acc.append((tp + tn) / total if total > 0 else 0.0)
    overall = sum(counts[c, c] for c in range(k)) / total if total > 0 else 0.0
    return {
        "precision": precision,
        "recall": recall,
        "f1": f1,
        "per_class_accuracy": acc,
        "macro_precision": sum(precision) / k,
        "macro_recall": sum(recall) / k,
        "macro_f1": sum(f1) / k,
        "accuracy": overall,
    }


class TestConfusionMatrix:
    def test_perfect_diagonal(self):
        cm = confusion_matrix([0, 1, 2], [0, 1, 2], num_classes=3)
        assert np.array_equal(cm.counts, np.eye(3, dtype=np.int64))

    def test_hand_count(self):
        cm = confusion_matrix([0, 0, 1], [0, 1, 1], num_classes=2)
        assert np.array_equal(cm.counts, [[1, 1], [0, 1]])

    def test_empty_inputs(self):
        cm = confusion_matrix([], [], num_classes=4)
        assert cm.total == 0
        assert cm.counts.shape == (4, 4)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length mismatch"):
            confusion_matrix([0, 1], [0], num_classes=2)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError, match="outside"):
            confusion_matrix([0, 2], [0, 1], num_classes=2)
        with pytest.raises(ValueError, match="outside"):
            confusion_matrix([0, 1], [0, -1], num_classes=2)

    def test_derived_quantities(self):
        cm = ConfusionMatrix(np.array([[5, 2], [1, 7]]))
        assert cm.total == 15
        assert list(cm.true_positives()) == [5, 7]
        assert list(cm.false_positives()) == [1, 2]
        assert list(cm.false_negatives()) == [2, 1]
        assert list(cm.true_negatives()) == [7, 5]


class TestMacroMetrics:
    def test_perfect_prediction_all_ones(self):
        rep = macro_metrics(ConfusionMatrix(np.diag([3, 4, 5])))
        assert rep.macro_f1 == 1.0
        assert rep.macro_precision == 1.0
        assert rep.macro_recall == 1.0
        assert rep.accuracy == 1.0

    def test_hand_worked_two_class(self):
        # counts [[1,1],[0,1]]: class0 p=1 r=.5 f1=2/3; class1 p=.5 r=1 f1=2/3
        rep = macro_metrics(ConfusionMatrix(np.array([[1, 1], [0, 1]])))
        assert rep.precision == pytest.approx([1.0, 0.5])
        assert rep.recall == pytest.approx([0.5, 1.0])
        assert rep.f1 == pytest.approx([2 / 3, 2 / 3])
        assert rep.macro_f1 == pytest.approx(2 / 3)
        assert rep.accuracy == pytest.approx(2 / 3)

    def test_matches_oracle_on_random_matrices(self):
        rng = np.random.default_rng(7)
        for _ in range(500):
            k = int(rng.integers(2, 7))
            counts = rng.integers(0, 40, size=(k, k))
            rep = macro_metrics(ConfusionMatrix(counts))
            ref = ovr_reference(counts)
            assert rep.precision == pytest.approx(ref["precision"], abs=1e-12)
            assert rep.recall == pytest.approx(ref["recall"], abs=1e-12)
            assert rep.f1 == pytest.approx(ref["f1"], abs=1e-12)
            assert rep.per_class_accuracy == pytest.approx(ref["per_class_accuracy"], abs=1e-12)
            assert rep.macro_f1 == pytest.approx(ref["macro_f1"], abs=1e-12)
            assert rep.accuracy == pytest.approx(ref["accuracy"], abs=1e-12)

    def test_zero_denominator_flagged_as_zero(self):
        # class 1 never predicted and never true
        rep = macro_metrics(ConfusionMatrix(np.array([[4, 0], [0, 0]])))
        assert rep.f1[1] == 0.0
        assert rep.zero_division_classes == ["class_1"]
        assert rep.macro_f1 == pytest.approx(0.5)

    def test_label_permutation_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            k = int(rng.integers(2, 6))
            counts = rng.integers(0, 30, size=(k, k))
            perm = rng.permutation(k)
            permuted = counts[np.ix_(perm, perm)]
            a = macro_metrics(ConfusionMatrix(counts))
            b = macro_metrics(ConfusionMatrix(permuted))
            assert a.macro_f1 == pytest.approx(b.macro_f1, abs=1e-12)
            assert a.macro_precision == pytest.approx(b.macro_precision, abs=1e-12)
            assert a.accuracy == pytest.approx(b.accuracy, abs=1e-12)
            # per-class metrics permute along with the labels
            assert np.asarray(a.f1)[perm] == pytest.approx(b.f1, abs=1e-12)

    def test_bounds_and_macro_between_extremes(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            k = int(rng.integers(2, 7))
            counts = rng.integers(0, 25, size=(k, k))
            rep = macro_metrics(ConfusionMatrix(counts))
            vals = rep.precision + rep.recall + rep.f1 + [
                rep.macro_precision, rep.macro_recall, rep.macro_f1, rep.accuracy,
            ]
            assert all(0.0 <= v <= 1.0 for v in vals)
            assert min(rep.f1) - 1e-12 <= rep.macro_f1 <= max(rep.f1) + 1e-12

    def test_empty_matrix(self):
        rep = macro_metrics(ConfusionMatrix(np.zeros((3, 3), dtype=int)))
        assert rep.accuracy == 0.0
        assert rep.macro_f1 == 0.0
        assert len(rep.zero_division_classes) == 3


class TestReportSerialization:
    def test_json_roundtrip(self):
        rep = evaluate([0, 1, 1, 2], [0, 1, 2, 2], ["a", "b", "c"])
        back = MetricsReport.from_dict(rep.to_dict())
        assert back.macro_f1 == rep.macro_f1
        assert back.class_names == rep.class_names
        assert back.support == rep.support

    def test_table_formatting(self):
        rep = evaluate([0, 1, 1, 0], [0, 1, 0, 0], ["x", "y"])
        text = format_report_table([("model_a", rep)], title="demo")
        assert "model_a" in text
        assert "F1 score" in text
        # percentages with two decimals
        assert f"{100 * rep.accuracy:.2f}" in text
