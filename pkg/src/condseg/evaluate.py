"""Sliding-window and multi-scale/flip evaluation.

Tiles never pad: the effective window is clamped to the image per
dimension, tile starts step by ``stride`` with a final flush tile, and
overlapping logits are averaged with per-pixel coverage counts. With
window >= image this degenerates to exactly one whole-image forward.

Multi-scale evaluation resizes the *probabilities* (post-softmax) of each
scaled/flipped branch back to native resolution and averages them; the
coarse maps inside the conditional head are recomputed on every forward,
as they must be, since they depend on the input.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, NumericError
from .imgops import hflip, resize_bilinear
from .losses import IGNORE_LABEL
from .metrics import ConfusionMatrix, argmax_labels, miou, per_class_iou, pixacc
from .model import SegModel
from .scenes import SceneSample


@dataclass(frozen=True)
class EvalConfig:
    window: int = 64
    stride: int = 48
    scales: tuple[float, ...] = (0.5, 0.75, 1.0, 1.25, 1.5, 1.75)
    flip: bool = True

    def __post_init__(self):
        if self.stride < 1 or self.stride > self.window:
            raise DimensionError(
                f"stride {self.stride} must lie in [1, window={self.window}]")
        if any(s <= 0 for s in self.scales) or not self.scales:
            raise DimensionError(f"scales must be positive, got {self.scales}")


def tile_starts(size: int, window: int, stride: int) -> list[int]:
    if window >= size:
        return [0]
    starts = list(range(0, size - window + 1, stride))
    if starts[-1] != size - window:
        starts.append(size - window)
    return starts


def sliding_window_logits(model: SegModel, image: np.ndarray,
                          window: int, stride: int) -> np.ndarray:
    """Average overlapping window logits over one [3,H,W] image."""
    if image.ndim != 3:
        raise DimensionError(f"expected [3,H,W] image, got {image.shape}")
    h, w = image.shape[1:]
    th, tw = min(window, h), min(window, w)
    ys = tile_starts(h, th, stride)
    xs = tile_starts(w, tw, stride)
    tiles = np.stack([image[:, y:y + th, x:x + tw] for y in ys for x in xs])
    logits = model.predict_logits(tiles)
    c = logits.shape[1]
    acc = np.zeros((c, h, w), dtype=logits.dtype)
    cover = np.zeros((h, w), dtype=logits.dtype)
    idx = 0
    for y in ys:  # fixed tile-index order; results do not depend on schedule
        for x in xs:
            acc[:, y:y + th, x:x + tw] += logits[idx]
            cover[y:y + th, x:x + tw] += 1.0
            idx += 1
    if cover.min() < 1.0:
        raise NumericError("sliding window left a pixel uncovered (tiling bug)")
    return acc / cover[None]


def _softmax3(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def multi_scale_probs(model: SegModel, image: np.ndarray, cfg: EvalConfig) -> np.ndarray:
    """Average class probabilities over scaled (and optionally flipped) branches."""
    h, w = image.shape[1:]
    total = None
    n_branches = 0
    for s in cfg.scales:
        sh, sw = max(1, int(round(h * s))), max(1, int(round(w * s)))
        scaled = resize_bilinear(image, sh, sw)
        for flipped in ((False, True) if cfg.flip else (False,)):
            inp = hflip(scaled) if flipped else scaled
            logits = sliding_window_logits(model, inp, cfg.window, cfg.stride)
            probs = _softmax3(logits)
            if flipped:
                probs = hflip(probs)
            probs = resize_bilinear(probs, h, w).astype(np.float64)
            total = probs if total is None else total + probs
            n_branches += 1
    return total / n_branches


@dataclass
class EvalReport:
    class_iou: np.ndarray
    class_defined: np.ndarray
    miou: float
    pixacc: float


def evaluate_dataset(model: SegModel, samples: list[SceneSample], cfg: EvalConfig,
                     collect_preds: bool = False
                     ) -> EvalReport | tuple[EvalReport, list[np.ndarray]]:
    cm = ConfusionMatrix(model.cfg.num_classes)
    preds = []
    for sample in samples:
        probs = multi_scale_probs(model, sample.image, cfg)
        pred = argmax_labels(probs)
        cm.update(pred, sample.mask, ignore=IGNORE_LABEL)
        if collect_preds:
            preds.append(pred)
    iou, defined = per_class_iou(cm)
    report = EvalReport(class_iou=iou, class_defined=defined,
                        miou=miou(cm), pixacc=pixacc(cm))
    return (report, preds) if collect_preds else report


def quick_eval(model: SegModel, samples: list[SceneSample]) -> EvalReport:
    """In-training validation path: one whole-image forward per sample,
    softmax, argmax. Equals the protocol path at scales=[1.0], no flip,
    window >= image."""
    cm = ConfusionMatrix(model.cfg.num_classes)
    for sample in samples:
        logits = model.predict_logits(sample.image[None])[0]
        pred = argmax_labels(_softmax3(logits))
        cm.update(pred, sample.mask, ignore=IGNORE_LABEL)
    iou, defined = per_class_iou(cm)
    return EvalReport(class_iou=iou, class_defined=defined,
                      miou=miou(cm), pixacc=pixacc(cm))


def write_eval_report(path: Path, report: EvalReport) -> None:
    """CSV contract: per-class `class,iou` rows, then a `miou,pixacc` line."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "iou"])
        for c, (iou, ok) in enumerate(zip(report.class_iou, report.class_defined)):
            writer.writerow([c, f"{iou:.6f}" if ok else "undefined"])
        writer.writerow(["miou", "pixacc"])
        writer.writerow([f"{report.miou:.6f}", f"{report.pixacc:.6f}"])
