"""End-to-end runs and the three paper-style experiments.

A "run" is: build train/eval datasets from the run seed, build a model
(backbone init shared across head types for the same seed), train, then
evaluate with the configured protocol. The experiment drivers vary exactly
one factor at a time - head type, probability-map loss, or loss weight -
over a common set of seeds, and write plain CSV tables.
"""

from __future__ import annotations

import csv
import dataclasses
import time
from dataclasses import dataclass
from pathlib import Path

from .config import RunConfig
from .datasets import load_dataset
from .errors import ConfigError
from .evaluate import EvalReport, evaluate_dataset
from .model import ModelConfig, SegModel
from .rng import Rng
from .scenes import AugmentConfig, SceneSample, build_dataset
from .train import TrainResult, train_model

EVAL_SEED_TAG = "data/eval"
TRAIN_SEED_TAG = "data/train"

LAMBDA_GRID = (0.0, 0.1, 0.2, 0.4, 0.6, 0.8, 1.0)


def dataset_seeds(seed: int) -> tuple[int, int]:
    base = Rng(seed)
    return base.stream(TRAIN_SEED_TAG).seed, base.stream(EVAL_SEED_TAG).seed


def build_run_datasets(cfg: RunConfig, seed: int
                       ) -> tuple[list[SceneSample], list[SceneSample]]:
    if cfg.dataset.root is not None:
        samples, _ = load_dataset(Path(cfg.dataset.root))
        if not samples:
            raise ConfigError(f"dataset under {cfg.dataset.root} is empty")
        n_eval = min(cfg.dataset.eval_count, max(1, len(samples) // 5))
        if len(samples) <= n_eval:
            raise ConfigError("dataset too small to hold out an eval split")
        return samples[:-n_eval], samples[-n_eval:]
    train_seed, eval_seed = dataset_seeds(seed)
    gen = cfg.dataset.generator
    return (build_dataset(train_seed, cfg.dataset.train_count, gen),
            build_dataset(eval_seed, cfg.dataset.eval_count, gen))


def augment_config(cfg: RunConfig) -> AugmentConfig:
    return AugmentConfig(crop=cfg.dataset.generator.canvas)


@dataclass
class RunOutcome:
    head: str
    prob_loss: str
    prob_weight: float
    seed: int
    report: EvalReport
    train_result: TrainResult
    model: SegModel
    seconds: float


def run_single(cfg: RunConfig, seed: int, *, head: str | None = None,
               prob_loss: str | None = None, prob_weight: float | None = None,
               prob_norm: str | None = None,
               checkpoint_on_abort: Path | None = None) -> RunOutcome:
    """Train and evaluate one model; keyword overrides vary one factor."""
    head = head if head is not None else cfg.model.head
    prob_loss = prob_loss if prob_loss is not None else cfg.prob_loss
    prob_weight = prob_weight if prob_weight is not None else cfg.loss.prob_weight
    if prob_norm is None:
        prob_norm = "sigmoid" if prob_loss == "bce" else cfg.model.prob_norm
    if prob_loss == "dice" and prob_norm != "softmax":
        raise ConfigError("dice supervision requires softmax probability maps")

    model_cfg = dataclasses.replace(cfg.model, head=head, prob_norm=prob_norm)
    loss_cfg = dataclasses.replace(cfg.loss, prob_weight=prob_weight)
    if head != "conditional":
        prob_loss = "none"

    started = time.perf_counter()
    train_samples, eval_samples = build_run_datasets(cfg, seed)
    run_rng = Rng(seed)
    model = SegModel.build(model_cfg, run_rng.stream("init"))
    result = train_model(model, train_samples, cfg.train, loss_cfg, prob_loss,
                         augment_config(cfg), run_rng,
                         checkpoint_on_abort=checkpoint_on_abort)
    report = evaluate_dataset(model, eval_samples, cfg.eval)
    return RunOutcome(head=head, prob_loss=prob_loss, prob_weight=prob_weight,
                      seed=seed, report=report, train_result=result, model=model,
                      seconds=time.perf_counter() - started)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def compare_heads(cfg: RunConfig, seeds: list[int], out_path: Path,
                  include_bias_free: bool = False) -> dict:
    """Global vs conditional on identical seeds/data; emits
    head,seed,miou,pixacc rows plus a delta summary row."""
    heads = ["global", "conditional"]
    if include_bias_free:
        heads.insert(1, "global_nobias")
    outcomes: dict[str, list[RunOutcome]] = {h: [] for h in heads}
    rows = []
    for head in heads:
        for seed in seeds:
            outcome = run_single(cfg, seed, head=head)
            outcomes[head].append(outcome)
            rows.append([head, seed, _fmt(outcome.report.miou),
                         _fmt(outcome.report.pixacc)])
    means = {h: (sum(o.report.miou for o in outs) / len(outs),
                 sum(o.report.pixacc for o in outs) / len(outs))
             for h, outs in outcomes.items()}
    delta_miou = means["conditional"][0] - means["global"][0]
    delta_pixacc = means["conditional"][1] - means["global"][1]
    rows.append(["delta", "mean", _fmt(delta_miou), _fmt(delta_pixacc)])
    _write_csv(out_path, ["head", "seed", "miou", "pixacc"], rows)
    return {"outcomes": outcomes, "means": means,
            "delta_miou": delta_miou, "delta_pixacc": delta_pixacc}


ABLATION_CONDITIONS = ("none", "bce", "dice")


def ablate_prob_loss(cfg: RunConfig, seeds: list[int], out_path: Path) -> dict:
    """Conditional head under prob_loss in {none, bce, dice}; emits
    condition,seed,miou,pixacc rows plus one mean row per condition."""
    outcomes: dict[str, list[RunOutcome]] = {c: [] for c in ABLATION_CONDITIONS}
    rows = []
    for condition in ABLATION_CONDITIONS:
        weight = 0.0 if condition == "none" else cfg.loss.prob_weight
        for seed in seeds:
            outcome = run_single(cfg, seed, head="conditional",
                                 prob_loss=condition, prob_weight=weight)
            outcomes[condition].append(outcome)
            rows.append([condition, seed, _fmt(outcome.report.miou),
                         _fmt(outcome.report.pixacc)])
    means = {}
    for condition in ABLATION_CONDITIONS:
        outs = outcomes[condition]
        means[condition] = sum(o.report.miou for o in outs) / len(outs)
        mean_pa = sum(o.report.pixacc for o in outs) / len(outs)
        rows.append([condition, "mean", _fmt(means[condition]), _fmt(mean_pa)])
    _write_csv(out_path, ["condition", "seed", "miou", "pixacc"], rows)
    return {"outcomes": outcomes, "means": means}


def sweep_prob_weight(cfg: RunConfig, lambdas: list[float], seeds: list[int],
                      out_path: Path) -> dict:
    """Dice-supervised conditional head over a loss-weight grid; the
    contract CSV holds one `lambda,miou` row per weight (seed means). A
    companion file with per-seed rows sits next to it."""
    means = {}
    per_seed_rows = []
    for lam in lambdas:
        # at weight 0 the dice term leaves the gradient entirely, so this
        # column reproduces the "none" ablation bit for bit on equal seeds
        mious = []
        for seed in seeds:
            outcome = run_single(cfg, seed, head="conditional", prob_loss="dice",
                                 prob_weight=lam)
            mious.append(outcome.report.miou)
            per_seed_rows.append([_fmt(lam), seed, _fmt(outcome.report.miou),
                                  _fmt(outcome.report.pixacc)])
        means[lam] = sum(mious) / len(mious)
    _write_csv(out_path, ["lambda", "miou"],
               [[_fmt(lam), _fmt(means[lam])] for lam in lambdas])
    runs_path = out_path.with_name(out_path.stem + "_runs.csv")
    _write_csv(runs_path, ["lambda", "seed", "miou", "pixacc"], per_seed_rows)
    return {"means": means}
