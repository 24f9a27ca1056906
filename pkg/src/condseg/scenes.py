"""Procedural scenes with a controllable intra-class appearance dial.

Each scene is a dark canvas with 3-6 colored rectangles/disks. Classes 1
and 2 are the designed "confusable pair": their hues are drawn from
globally overlapping intervals (overlap fraction set by ``kappa``), so no
fixed per-pixel color rule can separate them across the whole dataset.
Within any single image, though, class 2's realized hue always exceeds
class 1's by at least ``hue_margin`` - the pair is perfectly separable by
comparing the two hues present in that image. A classifier that can adapt
to the image (e.g. via per-image class centers) can exploit this; one
fixed kernel per class cannot.

At kappa=0 the intervals are disjoint and the pair is globally separable,
which turns the dial off. All remaining classes get well-separated hues.

Draw order per sample is fixed: pair hues (rejection-sampled jointly),
other class hues, shape count, per-shape (class, kind, center, half-sizes),
then per-pixel noise. A sample is a pure function of its seed.
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigError
from .imgops import hflip, resize_bilinear, resize_nearest
from .losses import IGNORE_LABEL
from .rng import Rng

_BACKGROUND_RGB = (0.12, 0.13, 0.15)
_SHAPE_SAT = 0.80
_SHAPE_VAL = 0.85
_MAX_HUE_ATTEMPTS = 100


@dataclass(frozen=True)
class SceneProvenance:
    seed: int
    class_hues: dict[int, float] = field(default_factory=dict)
    n_shapes: int = 0


@dataclass(frozen=True)
class SceneSample:
    image: np.ndarray  # [3,H,W] float32 in [0,1]
    mask: np.ndarray   # [H,W] uint8; 255 only ever comes from augmentation padding
    provenance: SceneProvenance


@dataclass(frozen=True)
class GeneratorConfig:
    num_classes: int = 4
    canvas: int = 64
    shapes_min: int = 3
    shapes_max: int = 6
    kappa: float = 0.8        # overlap fraction of the confusable pair's intervals
    hue_margin: float = 0.1   # per-image separation of the pair's realized hues
    hue_jitter: float = 0.02
    noise_sigma: float = 0.02
    pair_anchor: float = 0.02
    pair_zone: float = 0.72   # hue budget reserved for the pair's intervals
    class_hue_intervals: tuple[tuple[float, float], ...] | None = None
    shape_half_min: int | None = None
    shape_half_max: int | None = None

    def resolve(self) -> "GeneratorConfig":
        """Materialize derived fields (hue intervals, shape size bounds).

        The pair's intervals share the fixed zone [anchor, anchor+zone]:
        width W = zone/(2-kappa) and shift S = (1-kappa)*W, so kappa=0
        gives two disjoint halves of the zone and kappa=1 two identical
        intervals, with the overlapped fraction of each interval equal to
        kappa throughout.
        """
        if self.num_classes < 3:
            raise ConfigError("generator needs >= 3 classes (background + the pair)")
        if not 0.0 <= self.kappa <= 1.0:
            raise ConfigError(f"kappa must lie in [0,1], got {self.kappa}")
        if self.shapes_min < 2 or self.shapes_min > self.shapes_max:
            raise ConfigError("need shapes_min >= 2 and shapes_min <= shapes_max")
        if self.canvas < 8:
            raise ConfigError(f"canvas {self.canvas} too small")
        if self.hue_margin <= 0 or self.pair_zone <= 2 * self.hue_margin:
            raise ConfigError("pair_zone must exceed twice the hue margin")
        intervals = self.class_hue_intervals
        if intervals is None:
            width = self.pair_zone / (2.0 - self.kappa)
            shift = (1.0 - self.kappa) * width
            lo1 = self.pair_anchor
            lo2 = self.pair_anchor + shift
            pair = [(lo1, lo1 + width), (lo2, lo2 + width)]
            others = []
            n_easy = self.num_classes - 3
            zone_end = self.pair_anchor + self.pair_zone
            for k in range(n_easy):
                center = zone_end + 0.06 + (0.98 - zone_end - 0.08) * \
                    (k + 0.5) / max(n_easy, 1)
                others.append((center - 0.02, center + 0.02))
            intervals = tuple(pair + others)
        intervals = tuple((float(lo), float(hi)) for lo, hi in intervals)
        if len(intervals) != self.num_classes - 1:
            raise ConfigError(
                f"need {self.num_classes - 1} hue intervals, got {len(intervals)}")
        if intervals[1][1] < intervals[0][0] + self.hue_margin:
            raise ConfigError("pair intervals cannot honor the hue margin")
        half_min = self.shape_half_min
        half_max = self.shape_half_max
        if half_min is None:
            half_min = max(3, round(self.canvas * 0.09))
        if half_max is None:
            half_max = max(half_min + 1, round(self.canvas * 0.22))
        return replace(self, class_hue_intervals=intervals,
                       shape_half_min=half_min, shape_half_max=half_max)


def _hue_to_rgb(hue: float) -> tuple[float, float, float]:
    return colorsys.hsv_to_rgb(hue % 1.0, _SHAPE_SAT, _SHAPE_VAL)


def _draw_pair_hues(rng: Rng, cfg: GeneratorConfig) -> tuple[float, float]:
    """Draw one hue per interval, sort, and reject until the gap holds.

    The lower realized hue always belongs to the first pair class: the
    within-image ordering is the signal that identifies the two classes,
    while their sorted marginals still overlap heavily at high kappa.
    """
    (lo1, hi1), (lo2, hi2) = cfg.class_hue_intervals[:2]
    j = cfg.hue_jitter
    for _ in range(_MAX_HUE_ATTEMPTS):
        u = rng.uniform(lo1, hi1) + rng.uniform(-j, j)
        v = rng.uniform(lo2, hi2) + rng.uniform(-j, j)
        h1, h2 = (u, v) if u <= v else (v, u)
        if h2 - h1 >= cfg.hue_margin:
            return h1, h2
    # deterministic fallback; resolve() guarantees lo1 + margin <= hi2
    return lo1, max(lo2, lo1 + cfg.hue_margin)


def generate_scene(rng: Rng, cfg: GeneratorConfig) -> SceneSample:
    """One synthetic sample; a pure function of (rng seed, cfg)."""
    cfg = cfg.resolve()
    size = cfg.canvas
    hues: dict[int, float] = {}
    h1, h2 = _draw_pair_hues(rng, cfg)
    hues[1], hues[2] = h1, h2
    for k in range(3, cfg.num_classes):
        lo, hi = cfg.class_hue_intervals[k - 1]
        hues[k] = rng.uniform(lo, hi) + rng.uniform(-cfg.hue_jitter, cfg.hue_jitter)

    image = np.empty((3, size, size), dtype=np.float32)
    for c, v in enumerate(_BACKGROUND_RGB):
        image[c] = v
    mask = np.zeros((size, size), dtype=np.uint8)

    n_shapes = cfg.shapes_min + rng.randint(cfg.shapes_max - cfg.shapes_min + 1)
    ys = np.arange(size)[:, None]
    xs = np.arange(size)[None, :]
    for i in range(n_shapes):
        if i == 0:
            cls = 1
        elif i == 1:
            cls = 2
        else:
            cls = 1 + rng.randint(cfg.num_classes - 1)
        is_disk = rng.uniform() < 0.5
        cy = rng.randint(size)
        cx = rng.randint(size)
        ry = cfg.shape_half_min + rng.randint(cfg.shape_half_max - cfg.shape_half_min + 1)
        rx = cfg.shape_half_min + rng.randint(cfg.shape_half_max - cfg.shape_half_min + 1)
        if is_disk:
            inside = ((ys - cy) / ry) ** 2 + ((xs - cx) / rx) ** 2 <= 1.0
        else:
            inside = (np.abs(ys - cy) <= ry) & (np.abs(xs - cx) <= rx)
        r, g, b = _hue_to_rgb(hues[cls])
        image[0][inside] = r
        image[1][inside] = g
        image[2][inside] = b
        mask[inside] = cls

    if cfg.noise_sigma > 0:
        image += rng.normal_array((3, size, size), std=cfg.noise_sigma,
                                  dtype=np.float32)
        np.clip(image, 0.0, 1.0, out=image)

    return SceneSample(image=image, mask=mask,
                       provenance=SceneProvenance(seed=rng.seed, class_hues=hues,
                                                  n_shapes=n_shapes))


def build_dataset(base_seed: int, count: int, cfg: GeneratorConfig) -> list[SceneSample]:
    """Samples i = 0..count-1 from seeds base_seed+i; order-independent."""
    cfg = cfg.resolve()
    return [generate_scene(Rng(base_seed + i), cfg) for i in range(count)]


# -- augmentation -------------------------------------------------------------

@dataclass(frozen=True)
class AugmentConfig:
    flip_prob: float = 0.5
    scale_range: tuple[float, float] = (0.5, 2.0)
    crop: int = 64
    pad_image: float = 0.0
    pad_mask: int = IGNORE_LABEL


def augment(sample: SceneSample, rng: Rng, cfg: AugmentConfig) -> SceneSample:
    """Random horizontal flip, uniform rescale, and crop-or-pad to cfg.crop.

    Masks rescale nearest-neighbor, images bilinearly. When the rescaled
    content is smaller than the crop it is placed at a random offset inside
    a padded canvas (image 0, mask 255). Consumes exactly four draws:
    flip, scale, y-offset, x-offset.
    """
    image, mask = sample.image, sample.mask
    if rng.uniform() < cfg.flip_prob:
        image, mask = hflip(image), hflip(mask)
    s = rng.uniform(*cfg.scale_range)
    new_h = max(1, int(round(image.shape[1] * s)))
    new_w = max(1, int(round(image.shape[2] * s)))
    image = resize_bilinear(image, new_h, new_w)
    mask = resize_nearest(mask, new_h, new_w)

    crop = cfg.crop
    out_img = np.full((3, crop, crop), cfg.pad_image, dtype=image.dtype)
    out_mask = np.full((crop, crop), cfg.pad_mask, dtype=mask.dtype)
    spans = []
    for extent in (new_h, new_w):
        if extent >= crop:
            off = rng.randint(extent - crop + 1)
            spans.append((slice(off, off + crop), slice(0, crop)))
        else:
            off = rng.randint(crop - extent + 1)
            spans.append((slice(0, extent), slice(off, off + extent)))
    (src_y, dst_y), (src_x, dst_x) = spans
    out_img[:, dst_y, dst_x] = image[:, src_y, src_x]
    out_mask[dst_y, dst_x] = mask[src_y, src_x]
    return SceneSample(image=out_img, mask=out_mask, provenance=sample.provenance)
