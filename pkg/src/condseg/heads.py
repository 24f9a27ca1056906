"""The two per-pixel classifiers over a shared feature map.

Global classifier: one weight matrix W in R^{C x Cf} applied identically
at every spatial position of every input, i.e. a 1x1 convolution. It has
to carve feature space the same way for all samples.

Conditional classifier: a three-step head that regenerates its kernels
per input.
  1. A coarse 1x1 head scores the features and normalizes them into
     per-pixel class probabilities P.
  2. Probability-weighted pooling turns (F, P) into one center per class:
         E[s] = sum_j P[s,j] * F[:,j] / N,      N = H*W.
     The division is by the pixel count N, not the class mass; a
     mass-normalized variant exists behind ``divisor="mass"`` for
     ablations only.
  3. A strictly per-class ("group") affine map turns centers into kernels,
         K[s] = W_gen[s] @ E[s] + b_gen[s],
     and the kernels correlate with the features, Y[s,j] = K[s] . F[:,j],
     with no bias term.

Because the pooling sums over positions and both classifiers act
pointwise, the composite is equivariant to any permutation of the pixel
positions. With W_gen = 0 the kernels collapse to the generator bias rows
and the conditional head degenerates to a (bias-free) global classifier,
so it strictly generalizes the global one.

These functions operate on single samples [.,H,W] and are the reference
for the batched graph ops in ``ops``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .tensor import matmul, softmax_channels

PROB_NORMS = ("softmax", "sigmoid")
DIVISORS = ("N", "mass")


@dataclass(frozen=True)
class LinearHeadParams:
    """1x1 classifier parameters: weight [C,Cf] and bias [C]."""
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2:
            raise DimensionError(f"weight must be [C,Cf], got {self.weight.shape}")
        if self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(
                f"bias {self.bias.shape} does not match weight {self.weight.shape}")


@dataclass(frozen=True)
class KernelGenParams:
    """Groupwise kernel generator: weight [C,Cf,Cf], bias [C,Cf].

    weight[s] maps class s's center to class s's kernel; there is no
    cross-class mixing by construction.
    """
    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 3:
            raise DimensionError(f"weight must be [C,Cf,Cf], got {self.weight.shape}")
        if self.bias.shape != self.weight.shape[:2]:
            raise DimensionError(
                f"bias {self.bias.shape} does not match weight {self.weight.shape}")


def _check_features(feats: np.ndarray) -> tuple[int, int, int]:
    if feats.ndim != 3:
        raise DimensionError(f"features must be [Cf,H,W], got {feats.shape}")
    return feats.shape


def global_classify(feats: np.ndarray, params: LinearHeadParams) -> np.ndarray:
    """Fixed 1x1 classification: Y[s,j] = W[s] . F[:,j] + bias[s]."""
    cf, h, w = _check_features(feats)
    if params.weight.shape[1] != cf:
        raise DimensionError(
            f"classifier expects {params.weight.shape[1]} channels, features have {cf}")
    flat = feats.reshape(cf, h * w)
    scores = matmul(params.weight, flat) + params.bias[:, None]
    return scores.reshape(params.weight.shape[0], h, w)


def coarse_probabilities(feats: np.ndarray, params: LinearHeadParams,
                         norm: str = "softmax") -> np.ndarray:
    """Coarse per-pixel class probabilities from a 1x1 head.

    softmax puts each pixel on the class simplex (the default); sigmoid
    normalizes each class plane independently and exists only to support
    the BCE ablation.
    """
    if norm not in PROB_NORMS:
        raise DimensionError(f"unknown probability normalization {norm!r}")
    scores = global_classify(feats, params)
    if norm == "softmax":
        return softmax_channels(scores)
    return np.where(scores >= 0,
                    1.0 / (1.0 + np.exp(-np.abs(scores))),
                    np.exp(-np.abs(scores)) / (1.0 + np.exp(-np.abs(scores)))
                    ).astype(scores.dtype)


def aggregate_class_features(feats: np.ndarray, probs: np.ndarray,
                             divisor: str = "N") -> np.ndarray:
    """Pool features into one center per class: E = P_flat @ F_flat^T / N.

    The default divides by the pixel count N. ``divisor="mass"`` divides
    row s by sum_j P[s,j] instead (ablation variant, never the default).
    """
    cf, h, w = _check_features(feats)
    if probs.ndim != 3 or probs.shape[1:] != (h, w):
        raise DimensionError(
            f"probability map {probs.shape} does not match features {feats.shape}")
    if divisor not in DIVISORS:
        raise DimensionError(f"unknown aggregation divisor {divisor!r}")
    n = h * w
    pf = probs.reshape(probs.shape[0], n)
    ff = feats.reshape(cf, n)
    raw = matmul(pf, ff.T)
    if divisor == "N":
        return raw * (1.0 / n)
    mass = np.maximum(pf.sum(axis=1), 1e-12)
    return raw / mass[:, None]


def generate_kernels(centers: np.ndarray, params: KernelGenParams) -> np.ndarray:
    """Per-class kernels K[s] = W[s] @ E[s] + bias[s].

    Sample-specific: recomputed for every input, never stored in
    checkpoints.
    """
    if centers.ndim != 2:
        raise DimensionError(f"centers must be [C,Cf], got {centers.shape}")
    if params.weight.shape[0] != centers.shape[0]:
        raise DimensionError(
            f"generator has {params.weight.shape[0]} class groups, centers have "
            f"{centers.shape[0]}")
    if params.weight.shape[2] != centers.shape[1]:
        raise DimensionError(
            f"generator input width {params.weight.shape[2]} does not match "
            f"center width {centers.shape[1]}")
    rows = [matmul(params.weight[s], centers[s][:, None])[:, 0] + params.bias[s]
            for s in range(centers.shape[0])]
    return np.stack(rows)


def conditional_classify(feats: np.ndarray, kernels: np.ndarray) -> np.ndarray:
    """Correlate generated kernels with features: Y[s,j] = K[s] . F[:,j].

    No bias term; the response is the kernel correlation alone.
    """
    cf, h, w = _check_features(feats)
    if kernels.ndim != 2 or kernels.shape[1] != cf:
        raise DimensionError(
            f"kernels {kernels.shape} do not match feature channels {cf}")
    flat = feats.reshape(cf, h * w)
    return matmul(kernels, flat).reshape(kernels.shape[0], h, w)


def condnet_head_forward(feats: np.ndarray, coarse: LinearHeadParams,
                         gen: KernelGenParams, norm: str = "softmax",
                         divisor: str = "N") -> tuple[np.ndarray, np.ndarray]:
    """Full conditional head: returns (P, Y).

    Identical to composing coarse_probabilities, aggregate_class_features,
    generate_kernels, and conditional_classify step by step.
    """
    probs = coarse_probabilities(feats, coarse, norm=norm)
    centers = aggregate_class_features(feats, probs, divisor=divisor)
    kernels = generate_kernels(centers, gen)
    logits = conditional_classify(feats, kernels)
    return probs, logits
