"""Tests for confusion-matrix metrics, macro averages, and report rendering."""

import numpy as np
import pytest

import mammonet.metrics as M
from mammonet.errors import DimensionError, InputError

LABELS = ("normal", "benign", "malignant")

# A worked example small enough to audit by hand:
#   rows = actual class, columns = predicted class.
HAND_COUNTS = np.array([
    [5, 2, 0],
    [1, 6, 1],
    [0, 2, 7],
])


def hand_report():
    cm = M.ConfusionMatrix(labels=LABELS, counts=HAND_COUNTS)
    return M.compute_metrics(cm)


class TestConfusionMatrix:
    def test_accumulate(self):
        cm = M.ConfusionMatrix(labels=LABELS)
        cm.accumulate(0, 0)
        cm.accumulate(0, 2)
        cm.accumulate(2, 2)
        assert cm.counts.tolist() == [[1, 0, 1], [0, 0, 0], [0, 0, 1]]

    def test_from_predictions(self):
        cm = M.ConfusionMatrix.from_predictions([0, 1, 2, 1], [0, 1, 1, 1], LABELS)
        assert cm.counts.tolist() == [[1, 0, 0], [0, 2, 0], [0, 1, 0]]

    def test_counts_add_across_batches(self):
        actuals = [0, 1, 2, 2, 0, 1, 2, 0]
        preds = [0, 1, 2, 1, 0, 0, 2, 2]
        whole = M.ConfusionMatrix.from_predictions(actuals, preds, LABELS)
        first = M.ConfusionMatrix.from_predictions(actuals[:3], preds[:3], LABELS)
        rest = M.ConfusionMatrix.from_predictions(actuals[3:], preds[3:], LABELS)
        assert np.array_equal(whole.counts, first.counts + rest.counts)

    def test_too_few_labels(self):
        with pytest.raises(DimensionError, match="2 classes"):
            M.ConfusionMatrix(labels=("only",))

    def test_counts_shape_mismatch(self):
        with pytest.raises(DimensionError, match="shape"):
            M.ConfusionMatrix(labels=LABELS, counts=np.zeros((2, 2)))

    def test_index_out_of_range(self):
        cm = M.ConfusionMatrix(labels=LABELS)
        with pytest.raises(InputError, match="out of range"):
            cm.accumulate(0, 3)

    def test_length_mismatch(self):
        with pytest.raises(InputError, match="2 actuals vs 1"):
            M.ConfusionMatrix.from_predictions([0, 1], [0], LABELS)


class TestComputeMetrics:
    def test_hand_precision_recall(self):
        report = hand_report()
        assert [m.precision for m in report.per_class] == [5 / 6, 6 / 10, 7 / 8]
        assert [m.recall for m in report.per_class] == [5 / 7, 6 / 8, 7 / 9]
        assert [m.support for m in report.per_class] == [7, 8, 9]
        assert report.total_support == 24
        assert report.accuracy == 18 / 24

    def test_hand_f1(self):
        report = hand_report()
        for m in report.per_class:
            assert m.f1 == 2.0 * m.precision * m.recall / (m.precision + m.recall)
            assert m.flags == ()

    def test_macro_is_unweighted_mean(self):
        report = hand_report()
        assert report.macro_precision == (5 / 6 + 6 / 10 + 7 / 8) / 3
        assert report.macro_recall == (5 / 7 + 6 / 8 + 7 / 9) / 3
        assert report.macro_f1 == sum(m.f1 for m in report.per_class) / 3

    def test_micro_precision_equals_accuracy(self):
        # With every sample assigned exactly one prediction, pooled
        # (micro) precision and recall both reduce to accuracy.
        counts = HAND_COUNTS
        micro_p = np.trace(counts) / counts.sum()
        assert micro_p == hand_report().accuracy

    def test_recount_matches_brute_force(self):
        rng = np.random.default_rng(24)
        for _ in range(200):
            n = int(rng.integers(1, 40))
            actuals = rng.integers(0, 3, n)
            preds = rng.integers(0, 3, n)
            cm = M.ConfusionMatrix.from_predictions(actuals, preds, LABELS)
            report = M.compute_metrics(cm)
            for i, m in enumerate(report.per_class):
                tp = int(np.sum((actuals == i) & (preds == i)))
                fp = int(np.sum((actuals != i) & (preds == i)))
                fn = int(np.sum((actuals == i) & (preds != i)))
                assert m.support == tp + fn
                expect_p = tp / (tp + fp) if tp + fp else 0.0
                expect_r = tp / (tp + fn) if tp + fn else 0.0
                assert m.precision == expect_p
                assert m.recall == expect_r
                if expect_p + expect_r:
                    assert m.f1 == 2.0 * expect_p * expect_r / (expect_p + expect_r)
                else:
                    assert m.f1 == 0.0
                assert (M.FLAG_PRECISION_UNDEFINED in m.flags) == (tp + fp == 0)
                assert (M.FLAG_RECALL_UNDEFINED in m.flags) == (tp + fn == 0)
            assert report.accuracy == float(np.sum(actuals == preds)) / n

    def test_f1_between_min_and_max(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            p, r = rng.uniform(0.01, 1.0, 2)
            f1, flags = M.f1_score(p, r)
            assert flags == ()
            assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12

    def test_empty_predicted_column_flags_precision(self):
        # Nothing predicted as class 0: precision undefined, recall a plain 0.
        cm = M.ConfusionMatrix(labels=("a", "b"), counts=[[0, 3], [0, 5]])
        report = M.compute_metrics(cm)
        a = report.per_class[0]
        assert a.precision == 0.0 and a.recall == 0.0 and a.f1 == 0.0
        assert a.flags == (M.FLAG_PRECISION_UNDEFINED, M.FLAG_F1_UNDEFINED)
        assert report.per_class[1].flags == ()

    def test_empty_actual_row_flags_recall(self):
        cm = M.ConfusionMatrix(
            labels=LABELS, counts=[[2, 0, 0], [0, 3, 0], [0, 0, 0]])
        report = M.compute_metrics(cm)
        missing = report.per_class[2]
        assert missing.support == 0
        assert set(missing.flags) == {M.FLAG_PRECISION_UNDEFINED,
                                      M.FLAG_RECALL_UNDEFINED,
                                      M.FLAG_F1_UNDEFINED}


class TestDisplayValue:
    @pytest.mark.parametrize("value,expected", [
        (0.0, "0.00"),
        (1.0, "1.00"),
        (0.5, "0.50"),
        (0.886666, "0.88"),       # truncates, never rounds up
        (0.899889, "0.89"),
        (0.999999, "0.99"),
        (8 / 9, "0.88"),
        (0.29, "0.29"),           # exact hundredths survive float noise
        (0.58, "0.58"),
        (0.07, "0.07"),
        (2.5, "2.50"),
    ])
    def test_cases(self, value, expected):
        assert M.display_value(value) == expected

    def test_published_style_averages(self):
        # Rounded per-class values whose plain means land mid-hundredth;
        # the displayed average truncates rather than rounding half up.
        pr = [(0.91, 0.89), (0.94, 0.90), (1.00, 0.87)]
        precisions = [p for p, _ in pr]
        recalls = [r for _, r in pr]
        f1s = [M.f1_score(p, r)[0] for p, r in pr]
        assert M.display_value(M.macro_average(precisions)) == "0.95"
        assert M.display_value(M.macro_average(recalls)) == "0.88"
        assert M.display_value(M.macro_average(f1s)) == "0.91"


class TestRendering:
    def test_report_rows(self):
        lines = M.render_report(hand_report()).splitlines()
        assert lines[0].split() == ["Class", "Precision", "Recall", "F1", "Score",
                                    "Support"]
        assert lines[1].split() == ["normal", "0.83", "0.71", "0.76", "7"]
        assert lines[2].split() == ["benign", "0.60", "0.75", "0.66", "8"]
        assert lines[3].split() == ["malignant", "0.87", "0.77", "0.82", "9"]
        assert lines[4].split() == ["Average", "0.76", "0.74", "0.75", "24"]
        assert len(lines) == 5

    def test_report_notes_undefined(self):
        cm = M.ConfusionMatrix(labels=("a", "b"), counts=[[0, 3], [0, 5]])
        text = M.render_report(M.compute_metrics(cm))
        assert "note: precision undefined for class a; reported as 0.00" in text
        assert "note: f1 undefined for class a; reported as 0.00" in text

    def test_metrics_csv_exact(self):
        cm = M.ConfusionMatrix(labels=("a", "b"), counts=[[1, 0], [0, 1]])
        assert M.metrics_csv(M.compute_metrics(cm)) == (
            "class,precision,recall,f1,support,flags\n"
            "a,1.0,1.0,1.0,1,\n"
            "b,1.0,1.0,1.0,1,\n"
            "macro,1.0,1.0,1.0,2,\n")

    def test_metrics_csv_full_precision(self):
        lines = M.metrics_csv(hand_report()).splitlines()
        fields = lines[1].split(",")
        assert fields[0] == "normal"
        assert float(fields[1]) == 5 / 6
        assert fields[1] == repr(5 / 6)
        assert fields[4] == "7"

    def test_metrics_csv_flags_column(self):
        cm = M.ConfusionMatrix(labels=("a", "b"), counts=[[0, 3], [0, 5]])
        lines = M.metrics_csv(M.compute_metrics(cm)).splitlines()
        assert lines[1].endswith(",precision_undefined;f1_undefined")

    def test_matrix_dump_exact(self):
        cm = M.ConfusionMatrix(labels=LABELS, counts=HAND_COUNTS)
        assert M.matrix_dump(cm) == "5 2 0\n1 6 1\n0 2 7\n"

    def test_render_confusion_labels(self):
        cm = M.ConfusionMatrix(labels=LABELS, counts=HAND_COUNTS)
        lines = M.render_confusion(cm).splitlines()
        assert lines[0].split() == ["actual\\predicted", "normal", "benign",
                                    "malignant"]
        assert lines[1].split() == ["normal", "5", "2", "0"]
        assert lines[3].split() == ["malignant", "0", "2", "7"]
