"""Gradient verification entry points: every op, plus whole-model checks.

The full-model check differentiates the complete chain - backbone convs,
coarse head, center pooling, kernel generation, dynamic classification,
and the weighted loss - with respect to the input image and every
parameter, and compares against the central-difference oracle in float64.
"""

from __future__ import annotations

import numpy as np

from . import ops
from .autodiff import GradCheckReport, grad_check, leaf
from .losses import one_hot_mask
from .model import ModelConfig, SegModel
from .rng import Rng


def _random_labels(rng: Rng, shape: tuple[int, ...], num_classes: int) -> np.ndarray:
    labels = np.empty(shape, dtype=np.int64)
    flat = labels.reshape(-1)
    for i in range(flat.size):
        flat[i] = rng.randint(num_classes)
    return labels


def full_model_gradcheck(rng: Rng, tolerance: float = 1e-5,
                         num_classes: int = 3, feat_channels: int = 4,
                         spatial: int = 6,
                         backbone_channels: tuple[int, ...] = (5, 4),
                         prob_weight: float = 0.2) -> GradCheckReport:
    """Check d(loss)/d(image, every parameter) for the conditional model."""
    cfg = ModelConfig(num_classes=num_classes, feat_channels=feat_channels,
                      backbone_channels=backbone_channels, head="conditional")
    template = SegModel.build(cfg, rng.stream("init"), dtype=np.float64)
    labels = _random_labels(rng.stream("labels"), (1, spatial, spatial), num_classes)
    q, valid = one_hot_mask(labels, num_classes)

    # grad_check passes inputs as keyword args, so parameter names lose
    # their dots here and are mapped back inside the closure.
    name_map = {name.replace(".", "_"): name for name in template.params}
    shapes = {safe: template.params[orig].data.shape
              for safe, orig in name_map.items()}
    shapes["image"] = (1, 3, spatial, spatial)

    def fn(image, **param_vars):
        params = {orig: param_vars[safe] for safe, orig in name_map.items()}
        out = SegModel(cfg, params).forward(image)
        l_seg = ops.cross_entropy(out.logits, labels)
        l_prob = ops.soft_dice(out.probs, q, valid, eps=1e-5)
        return ops.add(l_seg, ops.scale(l_prob, prob_weight))

    return grad_check("full_model", fn, shapes, rng, tolerance=tolerance)


def backbone_gradcheck(rng: Rng, tolerance: float = 1e-5,
                       spatial: int = 8) -> GradCheckReport:
    """End-to-end check of the conv+relu stack on a 3 x spatial^2 input."""
    proj = rng.stream("proj/backbone").normal_array((1, 4, spatial, spatial))

    def fn(image, w0, b0, w1, b1):
        h = ops.relu(ops.conv2d(image, w0, b0, stride=1, padding=1))
        h = ops.relu(ops.conv2d(h, w1, b1, stride=1, padding=1))
        return ops.sum_all(ops.mul(h, leaf(proj)))

    shapes = {"image": (1, 3, spatial, spatial), "w0": (5, 3, 3, 3), "b0": (5,),
              "w1": (4, 5, 3, 3), "b1": (4,)}
    return grad_check("backbone", fn, shapes, rng, tolerance=tolerance)


def head_gradcheck(rng: Rng, tolerance: float = 1e-5) -> GradCheckReport:
    """Conditional head alone: gradients w.r.t. features, coarse head
    parameters, and generator parameters through the overall loss."""
    num_classes, cf, hw = 3, 4, 5
    labels = _random_labels(rng.stream("labels/head"), (1, hw, hw), num_classes)
    q, valid = one_hot_mask(labels, num_classes)

    def fn(feats, coarse_w, coarse_b, gen_w, gen_b):
        scores = ops.channel_linear(feats, coarse_w, coarse_b)
        probs = ops.softmax_channels(scores)
        centers = ops.class_aggregate(feats, probs, divisor="N")
        kernels = ops.group_linear(centers, gen_w, gen_b)
        logits = ops.cond_classify(feats, kernels)
        l_seg = ops.cross_entropy(logits, labels)
        l_prob = ops.soft_dice(probs, q, valid, eps=1e-5)
        return ops.add(l_seg, ops.scale(l_prob, 0.2))

    shapes = {"feats": (1, cf, hw, hw), "coarse_w": (num_classes, cf),
              "coarse_b": (num_classes,), "gen_w": (num_classes, cf, cf),
              "gen_b": (num_classes, cf)}
    return grad_check("conditional_head", fn, shapes, rng, tolerance=tolerance)


def run_verification(seed: int = 2024) -> list[GradCheckReport]:
    """The whole gradcheck suite: all registered ops plus the model checks."""
    rng = Rng(seed)
    reports = ops.run_all_gradchecks(rng)
    reports.append(backbone_gradcheck(rng))
    reports.append(head_gradcheck(rng))
    reports.append(full_model_gradcheck(rng))
    return reports
