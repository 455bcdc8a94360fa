import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix, f1_score, precision_recall_fscore_support

from src.corpus.records import CLASS_NAMES


@dataclass
class Metrics:
    """
    Classification metrics from a confusion matrix (rows = true, cols = predicted).

    Per-class precision/recall/F1 are one-vs-rest; a class with
    precision + recall = 0 (or never seen) gets F1 = 0. Macro F1 is the
    unweighted mean over all classes; micro F1 pools TP/FP/FN and equals
    accuracy for single-label data.
    """

    confusion: np.ndarray
    per_class: Dict[str, Dict[str, float]]
    accuracy: float
    f1_macro: float
    f1_micro: float
    class_names: List[str]

    def to_dict(self) -> dict:
        return {
            "class_names": list(self.class_names),
            "confusion": self.confusion.tolist(),
            "per_class": self.per_class,
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "f1_micro": self.f1_micro,
        }

    def confusion_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.confusion, index=self.class_names, columns=self.class_names)

    def write(self, json_path: Path, csv_path: Path) -> None:
        json_path = Path(json_path)
        json_path.parent.mkdir(parents=True, exist_ok=True)
        json_path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        self.confusion_frame().to_csv(csv_path, index_label="true\\pred")


def compute_metrics(y_true: Sequence[int], y_pred: Sequence[int], class_names: Sequence[str] = CLASS_NAMES) -> Metrics:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.size == 0:
        raise ValueError("Cannot compute metrics on an empty set.")
    if y_true.shape != y_pred.shape:
        raise ValueError(f"y_true {y_true.shape} and y_pred {y_pred.shape} differ in shape")

    labels = list(range(len(class_names)))
    cm = confusion_matrix(y_true, y_pred, labels=labels)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=labels, zero_division=0
    )
    per_class = {
        name: {
            "precision": float(precision[i]),
            "recall": float(recall[i]),
            "f1": float(f1[i]),
            "support": int(support[i]),
        }
        for i, name in enumerate(class_names)
    }
    return Metrics(
        confusion=cm,
        per_class=per_class,
        accuracy=float(np.trace(cm) / cm.sum()),
        f1_macro=float(np.mean(f1)),
        f1_micro=float(f1_score(y_true, y_pred, labels=labels, average="micro", zero_division=0)),
        class_names=list(class_names),
    )
