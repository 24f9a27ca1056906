"""Model assembly: backbone plus one of the classifier heads, as a tape graph.

Parameters are named leaf ``Var``s; the names are the checkpoint keys and
the gradient-store keys. Both head types share the backbone parameter
streams, so two models built from the same seed start from identical
backbone weights regardless of head choice.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ops
from .autodiff import Var, leaf
from .backbone import BackboneConfig, init_backbone_params
from .errors import ConfigError, DimensionError
from .heads import DIVISORS, PROB_NORMS
from .rng import Rng

HEAD_KINDS = ("global", "global_nobias", "conditional")


@dataclass(frozen=True)
class ModelConfig:
    num_classes: int = 4
    feat_channels: int = 32
    backbone_channels: tuple[int, ...] = (16, 32, 32)
    head: str = "conditional"
    prob_norm: str = "softmax"
    detach_p: bool = False
    eq2_divisor: str = "N"

    def __post_init__(self):
        if self.head not in HEAD_KINDS:
            raise ConfigError(f"unknown head {self.head!r}; choose from {HEAD_KINDS}")
        if self.prob_norm not in PROB_NORMS:
            raise ConfigError(f"unknown prob_norm {self.prob_norm!r}")
        if self.eq2_divisor not in DIVISORS:
            raise ConfigError(f"unknown eq2_divisor {self.eq2_divisor!r}")
        if self.backbone_channels[-1] != self.feat_channels:
            raise ConfigError(
                f"last backbone channel count {self.backbone_channels[-1]} must "
                f"equal feat_channels {self.feat_channels}")
        if self.num_classes < 2:
            raise ConfigError("need at least two classes")


@dataclass
class ForwardOut:
    logits: Var
    probs: Var | None = None
    coarse_scores: Var | None = None


class SegModel:
    """Named parameters plus the forward graph for the configured head."""

    def __init__(self, cfg: ModelConfig, params: dict[str, Var]):
        self.cfg = cfg
        self.params = params

    @classmethod
    def build(cls, cfg: ModelConfig, rng: Rng, dtype=np.float32) -> "SegModel":
        params: dict[str, Var] = {}
        bb_cfg = BackboneConfig(in_channels=3, channels=tuple(cfg.backbone_channels))
        for i, layer in enumerate(init_backbone_params(bb_cfg, rng, dtype=dtype)):
            params[f"backbone.conv{i}.weight"] = leaf(layer.weight,
                                                      name=f"backbone.conv{i}.weight")
            params[f"backbone.conv{i}.bias"] = leaf(layer.bias,
                                                    name=f"backbone.conv{i}.bias")
        c, cf = cfg.num_classes, cfg.feat_channels
        he = float(np.sqrt(2.0 / cf))

        def add_param(name: str, arr: np.ndarray) -> None:
            params[name] = leaf(np.ascontiguousarray(arr, dtype=dtype), name=name)

        if cfg.head == "conditional":
            add_param("head.coarse.weight",
                      rng.stream("init/head.coarse.weight").normal_array((c, cf), std=he))
            add_param("head.coarse.bias", np.zeros(c))
            add_param("head.gen.weight",
                      rng.stream("init/head.gen.weight").normal_array((c, cf, cf), std=he))
            add_param("head.gen.bias", np.zeros((c, cf)))
        else:
            add_param("head.global.weight",
                      rng.stream("init/head.global.weight").normal_array((c, cf), std=he))
            if cfg.head == "global":
                add_param("head.global.bias", np.zeros(c))
        return cls(cfg, params)

    # -- forward ----------------------------------------------------------

    def backbone_features(self, x: Var) -> Var:
        feats = x
        n_layers = len(self.cfg.backbone_channels)
        for i in range(n_layers):
            feats = ops.relu(ops.conv2d(feats,
                                        self.params[f"backbone.conv{i}.weight"],
                                        self.params[f"backbone.conv{i}.bias"],
                                        stride=1, padding=1))
        return feats

    def forward(self, x: Var) -> ForwardOut:
        """Graph forward on a [B,3,H,W] batch."""
        if x.data.ndim != 4 or x.data.shape[1] != 3:
            raise DimensionError(f"model input must be [B,3,H,W], got {x.data.shape}")
        feats = self.backbone_features(x)
        if self.cfg.head == "conditional":
            scores = ops.channel_linear(feats, self.params["head.coarse.weight"],
                                        self.params["head.coarse.bias"])
            if self.cfg.prob_norm == "softmax":
                probs = ops.softmax_channels(scores)
            else:
                probs = ops.sigmoid_channels(scores)
            pooled_from = ops.detach(probs) if self.cfg.detach_p else probs
            centers = ops.class_aggregate(feats, pooled_from,
                                          divisor=self.cfg.eq2_divisor)
            kernels = ops.group_linear(centers, self.params["head.gen.weight"],
                                       self.params["head.gen.bias"])
            logits = ops.cond_classify(feats, kernels)
            return ForwardOut(logits=logits, probs=probs, coarse_scores=scores)
        bias = self.params.get("head.global.bias")
        logits = ops.channel_linear(feats, self.params["head.global.weight"], bias)
        return ForwardOut(logits=logits)

    def predict_logits(self, images: np.ndarray) -> np.ndarray:
        """Plain-array forward for evaluation: [B,3,H,W] -> [B,C,H,W]."""
        dtype = next(iter(self.params.values())).data.dtype
        return self.forward(leaf(np.ascontiguousarray(images, dtype=dtype))).logits.data

    # -- parameter plumbing -------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: var.data for name, var in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        mine = self.state_arrays()
        missing = sorted(set(mine) - set(arrays))
        extra = sorted(set(arrays) - set(mine))
        shape_diffs = [
            f"{k}: checkpoint {arrays[k].shape} vs model {mine[k].shape}"
            for k in sorted(set(mine) & set(arrays))
            if arrays[k].shape != mine[k].shape
        ]
        if missing or extra or shape_diffs:
            raise ConfigError(
                "checkpoint does not match the model configuration; "
                f"missing={missing}, unexpected={extra}, shape diffs={shape_diffs}")
        for name, arr in arrays.items():
            var = self.params[name]
            var.data = np.ascontiguousarray(arr, dtype=var.data.dtype)
