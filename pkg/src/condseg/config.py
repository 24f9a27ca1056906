"""Run configuration: one JSON document drives every command.

Schema (all keys optional, defaults shown by ``default_config_dict``):

    {
      "seed": 0,
      "dataset": {"root": null, "train_count": 200, "eval_count": 40,
                  "generator": {...see GeneratorConfig...}},
      "model": {"head": "conditional"|"global"|"global_nobias",
                "feat_channels": 32, "backbone_channels": [16,32,32],
                "prob_norm": "softmax"|"sigmoid", "detach_p": false,
                "eq2_divisor": "N"|"mass"},
      "loss": {"lambda": 0.2, "eps": 1e-5, "prob_loss": "dice"|"bce"|"none"},
      "train": {"batch": 8, "iters": 1000, "base_lr": 0.05},
      "eval": {"window": 64, "stride": 48, "scales": [...], "flip": true}
    }

Unknown keys are rejected. Every command echoes the fully-resolved
document (defaults materialized) to its output directory before running.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError
from .evaluate import EvalConfig
from .losses import LossConfig
from .model import ModelConfig
from .scenes import GeneratorConfig
from .train import PROB_LOSSES, TrainConfig


@dataclass(frozen=True)
class DataConfig:
    root: str | None = None
    train_count: int = 200
    eval_count: int = 40
    generator: GeneratorConfig = dataclasses.field(default_factory=GeneratorConfig)

    def __post_init__(self):
        if self.train_count < 1 or self.eval_count < 1:
            raise ConfigError("train_count and eval_count must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    dataset: DataConfig = dataclasses.field(default_factory=DataConfig)
    model: ModelConfig = dataclasses.field(default_factory=ModelConfig)
    loss: LossConfig = dataclasses.field(default_factory=LossConfig)
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    eval: EvalConfig = dataclasses.field(default_factory=EvalConfig)
    prob_loss: str = "dice"

    def validate(self) -> "RunConfig":
        if self.prob_loss not in PROB_LOSSES:
            raise ConfigError(f"prob_loss must be one of {PROB_LOSSES}")
        if self.prob_loss == "bce" and self.model.prob_norm != "sigmoid":
            raise ConfigError("prob_loss 'bce' requires prob_norm 'sigmoid'")
        if self.prob_loss == "dice" and self.model.prob_norm != "softmax":
            raise ConfigError("prob_loss 'dice' requires prob_norm 'softmax'")
        if self.model.num_classes != self.dataset.generator.num_classes:
            raise ConfigError(
                f"model num_classes {self.model.num_classes} must match generator "
                f"num_classes {self.dataset.generator.num_classes}")
        if self.train.batch < 1 or self.train.iters < 1 or self.train.base_lr <= 0:
            raise ConfigError("train needs batch >= 1, iters >= 1, base_lr > 0")
        self.dataset.generator.resolve()  # raises on inconsistent generator settings
        return self


_SECTION_KEYS = {
    "dataset": {"root", "train_count", "eval_count", "generator"},
    "generator": {f.name for f in dataclasses.fields(GeneratorConfig)},
    "model": {"head", "feat_channels", "backbone_channels", "prob_norm",
              "detach_p", "eq2_divisor", "num_classes"},
    "loss": {"lambda", "eps", "prob_loss"},
    "train": {"batch", "iters", "base_lr"},
    "eval": {"window", "stride", "scales", "flip"},
}
_TOP_KEYS = {"seed", "dataset", "model", "loss", "train", "eval"}


def _check_keys(section: str, given: dict, allowed: set[str]) -> None:
    unknown = sorted(set(given) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in {section!r} "
                          f"(allowed: {sorted(allowed)})")


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"config root must be an object, got {type(doc).__name__}")
    _check_keys("top level", doc, _TOP_KEYS)
    try:
        data_doc = dict(doc.get("dataset", {}))
        _check_keys("dataset", data_doc, _SECTION_KEYS["dataset"])
        gen_doc = dict(data_doc.pop("generator", {}))
        _check_keys("dataset.generator", gen_doc, _SECTION_KEYS["generator"])
        if "class_hue_intervals" in gen_doc and gen_doc["class_hue_intervals"] is not None:
            gen_doc["class_hue_intervals"] = tuple(
                tuple(pair) for pair in gen_doc["class_hue_intervals"])
        generator = GeneratorConfig(**gen_doc)
        dataset = DataConfig(generator=generator, **data_doc)

        model_doc = dict(doc.get("model", {}))
        _check_keys("model", model_doc, _SECTION_KEYS["model"])
        if "backbone_channels" in model_doc:
            model_doc["backbone_channels"] = tuple(model_doc["backbone_channels"])
        model_doc.setdefault("num_classes", generator.num_classes)
        model = ModelConfig(**model_doc)

        loss_doc = dict(doc.get("loss", {}))
        _check_keys("loss", loss_doc, _SECTION_KEYS["loss"])
        prob_loss = loss_doc.pop("prob_loss", "dice")
        if "lambda" in loss_doc:
            loss_doc["prob_weight"] = loss_doc.pop("lambda")
        loss = LossConfig(**loss_doc)

        train_doc = dict(doc.get("train", {}))
        _check_keys("train", train_doc, _SECTION_KEYS["train"])
        train = TrainConfig(**train_doc)

        eval_doc = dict(doc.get("eval", {}))
        _check_keys("eval", eval_doc, _SECTION_KEYS["eval"])
        if "scales" in eval_doc:
            eval_doc["scales"] = tuple(eval_doc["scales"])
        eval_cfg = EvalConfig(**eval_doc)
    except ConfigError:
        raise
    except Exception as err:  # bad types/values inside a section
        raise ConfigError(str(err)) from err

    cfg = RunConfig(seed=int(doc.get("seed", 0)), dataset=dataset, model=model,
                    loss=loss, train=train, eval=eval_cfg, prob_loss=prob_loss)
    return cfg.validate()


def config_to_dict(cfg: RunConfig) -> dict:
    """Fully-resolved document: every default materialized, derived fields too."""
    gen = cfg.dataset.generator.resolve()
    return {
        "seed": cfg.seed,
        "dataset": {
            "root": cfg.dataset.root,
            "train_count": cfg.dataset.train_count,
            "eval_count": cfg.dataset.eval_count,
            "generator": {
                "num_classes": gen.num_classes,
                "canvas": gen.canvas,
                "shapes_min": gen.shapes_min,
                "shapes_max": gen.shapes_max,
                "kappa": gen.kappa,
                "hue_margin": gen.hue_margin,
                "hue_jitter": gen.hue_jitter,
                "noise_sigma": gen.noise_sigma,
                "pair_anchor": gen.pair_anchor,
                "pair_width": gen.pair_width,
                "class_hue_intervals": [list(p) for p in gen.class_hue_intervals],
                "shape_half_min": gen.shape_half_min,
                "shape_half_max": gen.shape_half_max,
            },
        },
        "model": {
            "num_classes": cfg.model.num_classes,
            "head": cfg.model.head,
            "feat_channels": cfg.model.feat_channels,
            "backbone_channels": list(cfg.model.backbone_channels),
            "prob_norm": cfg.model.prob_norm,
            "detach_p": cfg.model.detach_p,
            "eq2_divisor": cfg.model.eq2_divisor,
        },
        "loss": {
            "lambda": cfg.loss.prob_weight,
            "eps": cfg.loss.eps,
            "prob_loss": cfg.prob_loss,
        },
        "train": {
            "batch": cfg.train.batch,
            "iters": cfg.train.iters,
            "base_lr": cfg.train.base_lr,
        },
        "eval": {
            "window": cfg.eval.window,
            "stride": cfg.eval.stride,
            "scales": list(cfg.eval.scales),
            "flip": cfg.eval.flip,
        },
    }


def default_config_dict() -> dict:
    return config_to_dict(RunConfig())


def load_config(path: Path) -> RunConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    return parse_config(doc)


def echo_config(cfg: RunConfig, out_dir: Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "config.json"
    path.write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
    return path
