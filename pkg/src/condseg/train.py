"""SGD training: heavy-ball momentum, poly learning-rate decay.

Update rule per step (no dampening, no weight decay):
    v <- m * v + g
    p <- p - lr * v
with lr = base_lr * (1 - iter/max_iter)^0.9 evaluated at the current
iteration. The loop is deterministic given its streams: batch indices,
augmentation draws, and parameter init each come from their own named
substream of the run seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ops
from .autodiff import GradientStore, backward, leaf
from .errors import DimensionError, NumericError, RangeError
from .losses import LossConfig, one_hot_mask
from .model import SegModel
from .rng import Rng
from .scenes import AugmentConfig, SceneSample, augment

POLY_POWER = 0.9
LOG_EVERY = 10

PROB_LOSSES = ("dice", "bce", "none")


@dataclass(frozen=True)
class TrainConfig:
    batch: int = 8
    iters: int = 1000
    base_lr: float = 0.05


@dataclass
class SgdState:
    base_lr: float
    max_iter: int
    momentum: float = 0.9
    iteration: int = 0
    velocities: dict[str, np.ndarray] = field(default_factory=dict)


def poly_lr(iteration: int, max_iter: int, base_lr: float,
            power: float = POLY_POWER) -> float:
    """base_lr * (1 - iter/max_iter)^power; strictly decreasing to 0."""
    if iteration < 0 or iteration > max_iter:
        raise RangeError(f"iteration {iteration} outside [0, {max_iter}]")
    if max_iter <= 0:
        raise RangeError(f"max_iter must be positive, got {max_iter}")
    return base_lr * (1.0 - iteration / max_iter) ** power


def sgd_step(params: dict, grads: GradientStore, state: SgdState) -> None:
    """One momentum update on every parameter; absent gradients are zero."""
    lr = poly_lr(state.iteration, state.max_iter, state.base_lr)
    for name, var in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(var.data)
        elif not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        v = state.velocities.get(name)
        if v is None:
            v = np.zeros_like(var.data)
        if v.shape != var.data.shape:
            raise DimensionError(
                f"velocity shape {v.shape} does not match parameter {name!r} "
                f"{var.data.shape}")
        v = state.momentum * v + g
        state.velocities[name] = v
        var.data = var.data - lr * v
    state.iteration += 1


@dataclass
class TrainLogRow:
    iteration: int
    lr: float
    l_seg: float
    l_prob: float
    l_overall: float


@dataclass
class TrainResult:
    log: list[TrainLogRow]
    state: SgdState


def write_train_log(path: Path, rows: list[TrainLogRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "lr", "l_seg", "l_prob", "l_overall"])
        for row in rows:
            writer.writerow([row.iteration, f"{row.lr:.8f}", f"{row.l_seg:.8f}",
                             f"{row.l_prob:.8f}", f"{row.l_overall:.8f}"])


def _batch_arrays(samples: list[SceneSample], dtype) -> tuple[np.ndarray, np.ndarray]:
    images = np.stack([s.image for s in samples]).astype(dtype, copy=False)
    masks = np.stack([s.mask for s in samples]).astype(np.int64)
    return images, masks


def train_model(model: SegModel, train_samples: list[SceneSample],
                train_cfg: TrainConfig, loss_cfg: LossConfig, prob_loss: str,
                aug_cfg: AugmentConfig, run_rng: Rng,
                checkpoint_on_abort: Path | None = None) -> TrainResult:
    """Deterministic loop: sample batch -> augment -> forward -> loss ->
    backward -> momentum step. Logs every LOG_EVERY iterations plus the
    last. On a non-finite loss or gradient the last good parameters are
    written to ``checkpoint_on_abort`` (if given) and NumericError raised.

    With prob_loss "none", or weight 0, the probability-map loss never
    enters the gradient: the optimization graph is exactly the
    cross-entropy graph (the dice value is still reported in the log when
    a probability head exists).
    """
    if not train_samples:
        raise DimensionError("training dataset is empty")
    if prob_loss not in PROB_LOSSES:
        raise DimensionError(f"unknown prob_loss {prob_loss!r}")
    has_prob_head = model.cfg.head == "conditional"
    use_prob_term = (has_prob_head and prob_loss != "none"
                     and loss_cfg.prob_weight > 0.0)

    batch_rng = run_rng.stream("batch")
    aug_rng = run_rng.stream("augment")
    dtype = next(iter(model.params.values())).data.dtype
    state = SgdState(base_lr=train_cfg.base_lr, max_iter=train_cfg.iters)
    rows: list[TrainLogRow] = []

    def abort(reason: str):
        if checkpoint_on_abort is not None:
            from .checkpoint import save_checkpoint
            save_checkpoint(checkpoint_on_abort, model.state_arrays())
        raise NumericError(reason)

    for it in range(train_cfg.iters):
        picked = [train_samples[batch_rng.randint(len(train_samples))]
                  for _ in range(train_cfg.batch)]
        batch = [augment(s, aug_rng, aug_cfg) for s in picked]
        images, labels = _batch_arrays(batch, dtype)

        out = model.forward(leaf(images))
        l_seg = ops.cross_entropy(out.logits, labels)
        l_prob_value = 0.0
        total = l_seg
        if has_prob_head and prob_loss != "none":
            q, valid = one_hot_mask(labels, model.cfg.num_classes)
            q = q.astype(dtype)
            if prob_loss == "dice":
                l_prob = ops.soft_dice(out.probs, q, valid, eps=loss_cfg.eps)
            else:
                l_prob = ops.bce_probmap(out.probs, q, valid)
            l_prob_value = float(l_prob.data)
            if use_prob_term:
                total = ops.add(l_seg, ops.scale(l_prob, loss_cfg.prob_weight))

        l_seg_value = float(l_seg.data)
        l_total_value = float(total.data)
        if not np.isfinite(l_total_value):
            abort(f"non-finite loss at iteration {it}")

        grads = backward(total)
        lr = poly_lr(state.iteration, state.max_iter, state.base_lr)
        try:
            sgd_step(model.params, grads, state)
        except NumericError as err:
            abort(f"{err} at iteration {it}")

        if it % LOG_EVERY == 0 or it == train_cfg.iters - 1:
            rows.append(TrainLogRow(iteration=it, lr=lr, l_seg=l_seg_value,
                                    l_prob=l_prob_value, l_overall=l_total_value))
    return TrainResult(log=rows, state=state)
