"""A small stride-1 fully-convolutional feature extractor.

Three 3x3 conv+relu layers, no normalization, no downsampling: output
spatial size always equals input size, so the classifier heads see one
feature vector per pixel. Deliberately tiny; it exists to feed the heads,
not to win benchmarks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError
from .rng import Rng
from .tensor import relu
from .autodiff import Var
from . import ops


@dataclass(frozen=True)
class ConvLayerParams:
    weight: np.ndarray  # [out, in, kh, kw]
    bias: np.ndarray    # [out]
    stride: int = 1
    padding: int = 1

    def __post_init__(self):
        if self.weight.ndim != 4:
            raise DimensionError(f"conv weight must be rank 4, got {self.weight.shape}")
        kh, kw = self.weight.shape[2:]
        if kh not in (1, 3) or kw not in (1, 3):
            raise DimensionError(f"kernel extents must be 1 or 3, got {kh}x{kw}")
        if self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(
                f"bias {self.bias.shape} does not match weight {self.weight.shape}")
        if self.stride == 1 and kh == 3 and self.padding != 1:
            raise DimensionError("3x3 stride-1 conv must pad 1 to preserve size")


@dataclass(frozen=True)
class BackboneConfig:
    in_channels: int = 3
    channels: tuple[int, ...] = (16, 32, 32)

    @property
    def feat_channels(self) -> int:
        return self.channels[-1]

    def __post_init__(self):
        if not self.channels:
            raise DimensionError("backbone needs at least one layer")


def conv2d(x: np.ndarray, p: ConvLayerParams) -> np.ndarray:
    """Single-sample cross-correlation plus bias: [in,H,W] -> [out,H',W']."""
    if x.ndim != 3:
        raise DimensionError(f"conv2d input must be [C,H,W], got {x.shape}")
    if x.shape[0] != p.weight.shape[1]:
        raise DimensionError(
            f"conv2d input has {x.shape[0]} channels, weight expects "
            f"{p.weight.shape[1]}")
    out = ops.conv2d(Var(x[None]), Var(p.weight), Var(p.bias),
                     stride=p.stride, padding=p.padding)
    return out.data[0]


def init_backbone_params(cfg: BackboneConfig, rng: Rng,
                         dtype=np.float32) -> list[ConvLayerParams]:
    """He-normal weights, zero biases; one named substream per tensor."""
    layers = []
    in_ch = cfg.in_channels
    for i, out_ch in enumerate(cfg.channels):
        fan_in = in_ch * 9
        std = float(np.sqrt(2.0 / fan_in))
        w = rng.stream(f"init/backbone.conv{i}.weight").normal_array(
            (out_ch, in_ch, 3, 3), std=std, dtype=dtype)
        b = np.zeros(out_ch, dtype=dtype)
        layers.append(ConvLayerParams(weight=w, bias=b))
        in_ch = out_ch
    return layers


def backbone_forward(image: np.ndarray, layers: list[ConvLayerParams]) -> np.ndarray:
    """conv+relu stack on one [3,H,W] image in [0,1]; output [Cf,H,W]."""
    x = image
    for p in layers:
        x = relu(conv2d(x, p))
    return x
