"""Evaluation metrics backed by an integer confusion matrix."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, NumericError, RangeError
from .losses import IGNORE_LABEL


class ConfusionMatrix:
    """C x C counts; entry [t][p] = pixels with truth t predicted p.

    Accumulation is single-writer; matrices merge by addition, so shard
    order never matters.
    """

    def __init__(self, num_classes: int):
        if num_classes < 1:
            raise DimensionError(f"need at least one class, got {num_classes}")
        self.num_classes = num_classes
        self.counts = np.zeros((num_classes, num_classes), dtype=np.int64)

    def update(self, pred: np.ndarray, truth: np.ndarray,
               ignore: int = IGNORE_LABEL) -> "ConfusionMatrix":
        if pred.shape != truth.shape:
            raise DimensionError(f"pred {pred.shape} vs truth {truth.shape}")
        valid = truth != ignore
        t = truth[valid].astype(np.int64)
        p = pred[valid].astype(np.int64)
        if t.size:
            if int(t.max()) >= self.num_classes or int(p.max()) >= self.num_classes:
                raise RangeError("label outside [0, num_classes)")
            if int(t.min()) < 0 or int(p.min()) < 0:
                raise RangeError("negative label")
            flat = np.bincount(t * self.num_classes + p,
                               minlength=self.num_classes ** 2)
            self.counts += flat.reshape(self.num_classes, self.num_classes)
        return self

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.num_classes != self.num_classes:
            raise DimensionError("cannot merge confusion matrices of different sizes")
        self.counts += other.counts
        return self

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def per_class_iou(cm: ConfusionMatrix) -> tuple[np.ndarray, np.ndarray]:
    """(iou, defined) arrays; a class is defined when tp+fp+fn > 0."""
    tp = np.diag(cm.counts).astype(np.float64)
    fp = cm.counts.sum(axis=0).astype(np.float64) - tp
    fn = cm.counts.sum(axis=1).astype(np.float64) - tp
    denom = tp + fp + fn
    defined = denom > 0
    iou = np.zeros_like(tp)
    iou[defined] = tp[defined] / denom[defined]
    return iou, defined


def miou(cm: ConfusionMatrix) -> float:
    """Mean IoU over the classes present in truth or prediction."""
    if cm.total == 0:
        raise NumericError("miou of an empty confusion matrix is undefined")
    iou, defined = per_class_iou(cm)
    return float(iou[defined].mean())


def pixacc(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise NumericError("pixacc of an empty confusion matrix is undefined")
    return float(np.trace(cm.counts) / cm.total)


def argmax_labels(logits_or_probs: np.ndarray) -> np.ndarray:
    """Per-pixel argmax over the channel axis; ties go to the lower class."""
    if logits_or_probs.ndim != 3:
        raise DimensionError(f"expected [C,H,W], got {logits_or_probs.shape}")
    return logits_or_probs.argmax(axis=0).astype(np.int64)
