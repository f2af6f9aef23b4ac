import logging
from dataclasses import dataclass

import numpy as np
from sklearn.metrics import accuracy_score, confusion_matrix, f1_score, silhouette_score

from app.core.errors import DataError, ShapeError
from app.numerics.linalg import as_matrix

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ClassificationReport:
    accuracy: float
    macro_f1: float
    weighted_f1: float
    per_class_f1: tuple
    confusion: tuple

    def to_dict(self):
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "per_class_f1": list(self.per_class_f1),
            "confusion": [list(row) for row in self.confusion],
        }


def classification_report(y_true, y_pred, n_classes):
    """Accuracy and F1 scores over the declared classes.

    Classes absent from both vectors score F1 = 0 and still count in the macro mean.
    """
    y_true = np.asarray(y_true, dtype=np.int64).reshape(-1)
    y_pred = np.asarray(y_pred, dtype=np.int64).reshape(-1)
    if y_true.shape != y_pred.shape:
        raise ShapeError(f"{y_true.shape[0]} true labels vs {y_pred.shape[0]} predictions")
    if y_true.size and (max(y_true.max(), y_pred.max()) >= n_classes or min(y_true.min(), y_pred.min()) < 0):
        raise DataError(f"labels must lie in [0, {n_classes})")
    classes = list(range(n_classes))
    per_class = f1_score(y_true, y_pred, labels=classes, average=None, zero_division=0)
    support = np.bincount(y_true, minlength=n_classes)
    macro = float(per_class.sum() / n_classes)
    if support.sum() == 0:
        weighted = 0.0
    elif np.all(support == support[0]):
        weighted = macro
    else:
        weighted = float(per_class @ support / support.sum())
    return ClassificationReport(
        accuracy=float(accuracy_score(y_true, y_pred)) if y_true.size else 0.0,
        macro_f1=macro,
        weighted_f1=weighted,
        per_class_f1=tuple(float(v) for v in per_class),
        confusion=tuple(tuple(int(v) for v in row) for row in confusion_matrix(y_true, y_pred, labels=classes)),
    )


def silhouette(features, labels, metric="euclidean"):
    """Mean silhouette coefficient; samples in singleton clusters contribute 0."""
    x = as_matrix(features, "silhouette features")
    labels = np.asarray(labels).reshape(-1)
    if labels.shape[0] != x.shape[0]:
        raise ShapeError(f"{labels.shape[0]} labels for {x.shape[0]} rows")
    n_labels = np.unique(labels).size
    if n_labels < 2:
        raise DataError("silhouette needs at least two classes")
    if n_labels == x.shape[0]:
        return 0.0
    return float(silhouette_score(x, labels, metric=metric))
