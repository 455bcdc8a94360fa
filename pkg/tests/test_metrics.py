import json

import numpy as np
import pytest

from src.models.metrics import compute_metrics

NAMES = ["Pass", "L0_L1", "L2", "L3"]


def _oracle(y_true, y_pred, k):
    f1s = []
    for c in range(k):
        tp = sum(t == c and p == c for t, p in zip(y_true, y_pred))
        fp = sum(t != c and p == c for t, p in zip(y_true, y_pred))
        fn = sum(t == c and p != c for t, p in zip(y_true, y_pred))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1s.append(2 * precision * recall / (precision + recall) if precision + recall else 0.0)
    accuracy = sum(t == p for t, p in zip(y_true, y_pred)) / len(y_true)
    return accuracy, sum(f1s) / k, f1s


def test_random_cases_match_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(500):
        n = int(rng.integers(1, 40))
        y_true = rng.integers(0, 4, size=n)
        y_pred = rng.integers(0, 4, size=n)
        m = compute_metrics(y_true, y_pred, NAMES)
        accuracy, macro, f1s = _oracle(y_true.tolist(), y_pred.tolist(), 4)

        assert m.accuracy == pytest.approx(accuracy)
        assert m.f1_micro == pytest.approx(accuracy)
        assert m.f1_macro == pytest.approx(macro)
        assert [m.per_class[name]["f1"] for name in NAMES] == pytest.approx(f1s)
        assert m.confusion.sum() == n


def test_confusion_rows_are_true_labels():
    m = compute_metrics([0, 0, 1, 3], [0, 1, 1, 2], NAMES)
    assert m.confusion.tolist() == [[1, 1, 0, 0], [0, 1, 0, 0], [0, 0, 0, 0], [0, 0, 1, 0]]
    assert m.per_class["L2"] == {"precision": 0.0, "recall": 0.0, "f1": 0.0, "support": 0}
    assert m.per_class["L3"]["support"] == 1


def test_perfect_predictions():
    m = compute_metrics([0, 1, 2, 3], [0, 1, 2, 3], NAMES)
    assert m.accuracy == m.f1_macro == m.f1_micro == 1.0


def test_rejects_empty_and_mismatched():
    with pytest.raises(ValueError):
        compute_metrics([], [], NAMES)
    with pytest.raises(ValueError):
        compute_metrics([0, 1], [0], NAMES)


def test_write_outputs(tmp_path):
    m = compute_metrics([0, 1, 2, 3, 3], [0, 1, 2, 3, 0], NAMES)
    m.write(tmp_path / "metrics.json", tmp_path / "confusion.csv")
    saved = json.loads((tmp_path / "metrics.json").read_text())
    assert saved["accuracy"] == pytest.approx(0.8)
    assert saved["class_names"] == NAMES
    header = (tmp_path / "confusion.csv").read_text().splitlines()[0]
    assert header.split(",")[1:] == NAMES
