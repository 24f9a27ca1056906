"""Training losses on single samples: cross entropy, soft dice, BCE.

These are the plain-array reference implementations used directly by tests
and by anything that only needs a value; the batched differentiable
versions live in ``ops`` and are cross-checked against these.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericError, RangeError

IGNORE_LABEL = 255


@dataclass(frozen=True)
class LossConfig:
    """Loss weighting: overall = prob_weight * L_prob + L_seg."""
    prob_weight: float = 0.2
    eps: float = 1e-5

    def __post_init__(self):
        if self.prob_weight < 0:
            raise DimensionError(f"prob_weight must be >= 0, got {self.prob_weight}")
        if self.eps <= 0:
            raise DimensionError(f"eps must be > 0, got {self.eps}")


@dataclass(frozen=True)
class OneHotMask:
    """One-hot truth [C,H,W] plus the validity mask excluding ignored pixels."""
    q: np.ndarray
    valid: np.ndarray

    @classmethod
    def from_labels(cls, labels: np.ndarray, num_classes: int,
                    ignore: int = IGNORE_LABEL) -> "OneHotMask":
        q, valid = one_hot_mask(labels[None], num_classes, ignore)
        return cls(q=q[0], valid=valid[0])


def one_hot_mask(labels: np.ndarray, num_classes: int,
                 ignore: int = IGNORE_LABEL) -> tuple[np.ndarray, np.ndarray]:
    """Batched one-hot encoding: [B,H,W] ints -> ([B,C,H,W] float64, [B,H,W] bool).

    Ignored pixels get an all-zero channel vector and ``valid`` False.
    """
    valid = labels != ignore
    present = labels[valid]
    if present.size and int(present.max()) >= num_classes:
        raise RangeError(f"label {int(present.max())} out of range for "
                         f"{num_classes} classes")
    safe = np.where(valid, labels, 0).astype(np.int64)
    q = np.zeros((labels.shape[0], num_classes) + labels.shape[1:], dtype=np.float64)
    b, h, w = np.nonzero(valid)
    q[b, safe[b, h, w], h, w] = 1.0
    return q, valid


def cross_entropy(logits: np.ndarray, labels: np.ndarray,
                  ignore: int = IGNORE_LABEL) -> float:
    """Mean -log softmax(Y)[label] over non-ignored pixels (log-sum-exp form)."""
    if logits.ndim != 3:
        raise DimensionError(f"logits must be [C,H,W], got {logits.shape}")
    if labels.shape != logits.shape[1:]:
        raise DimensionError(f"labels {labels.shape} do not match logits {logits.shape}")
    valid = labels != ignore
    count = int(valid.sum())
    if count == 0:
        raise NumericError("cross_entropy: every pixel is ignored, mean undefined")
    present = labels[valid]
    if int(present.max()) >= logits.shape[0]:
        raise RangeError(f"label {int(present.max())} out of range")
    m = logits.max(axis=0)
    lse = np.log(np.exp(logits - m).sum(axis=0)) + m
    safe = np.where(valid, labels, 0).astype(np.int64)
    picked = np.take_along_axis(logits, safe[None], axis=0)[0]
    return float((lse - picked)[valid].sum() / count)


def soft_dice(probs: np.ndarray, mask: OneHotMask, eps: float = 1e-5) -> float:
    """Per-class dice loss averaged over classes with truth or prediction mass.

    For class s over the valid pixels:
        loss_s = 1 - 2*sum(p*q) / (sum(p^2) + sum(q^2) + eps)
    Classes with zero truth and zero prediction mass are excluded from the
    average. The result lies in [0, 1].
    """
    if probs.ndim != 3 or probs.shape != mask.q.shape:
        raise DimensionError(
            f"probabilities {probs.shape} do not match one-hot {mask.q.shape}")
    if probs.min() < -1e-6 or probs.max() > 1.0 + 1e-6:
        raise NumericError("soft_dice: probabilities must lie in [0, 1]")
    if int(mask.valid.sum()) == 0:
        raise NumericError("soft_dice: every pixel is ignored, mean undefined")
    vm = mask.valid.astype(probs.dtype)
    pv = probs * vm
    q = mask.q.astype(probs.dtype)
    s_pq = (pv * q).sum(axis=(1, 2))
    s_pp = (pv * pv).sum(axis=(1, 2))
    s_qq = (q * q).sum(axis=(1, 2))
    loss_c = 1.0 - 2.0 * s_pq / (s_pp + s_qq + eps)
    include = (s_qq > 0) | (s_pp > 0)
    if not include.any():
        raise NumericError("soft_dice: no classes to average")
    return float(loss_c[include].mean())


def bce_probmap(probs: np.ndarray, mask: OneHotMask) -> float:
    """Mean binary cross entropy over classes and non-ignored pixels.

    Probabilities are clamped to [1e-7, 1-1e-7] before the logs.
    """
    if probs.ndim != 3 or probs.shape != mask.q.shape:
        raise DimensionError(
            f"probabilities {probs.shape} do not match one-hot {mask.q.shape}")
    n_valid = int(mask.valid.sum())
    if n_valid == 0:
        raise NumericError("bce_probmap: every pixel is ignored, mean undefined")
    pc = np.clip(probs, 1e-7, 1.0 - 1e-7)
    q = mask.q.astype(probs.dtype)
    pixel = -(q * np.log(pc) + (1.0 - q) * np.log1p(-pc))
    vm = mask.valid.astype(probs.dtype)
    return float((pixel * vm[None]).sum() / (n_valid * probs.shape[0]))


def overall_loss(l_prob: float, l_seg: float, cfg: LossConfig) -> float:
    """Weighted sum prob_weight * L_prob + L_seg."""
    if not (np.isfinite(l_prob) and np.isfinite(l_seg)):
        raise NumericError("overall_loss: inputs must be finite")
    return cfg.prob_weight * l_prob + l_seg
