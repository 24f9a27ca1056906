"""Command-line interface.

Commands: gen-data, train, eval, gradcheck, compare, ablate-loss,
sweep-lambda. Every command echoes its fully-resolved config into the
output directory before doing any work.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .checkpoint import load_checkpoint, save_checkpoint
from .config import RunConfig, echo_config, load_config
from .datasets import write_dataset
from .errors import (ChecksumError, ConfigError, DimensionError, NumericError,
                     ParseError, RangeError)
from .evaluate import evaluate_dataset, quick_eval, write_eval_report
from .experiments import (LAMBDA_GRID, ablate_prob_loss, build_run_datasets,
                          compare_heads, run_single, sweep_prob_weight)
from .model import SegModel
from .rng import Rng
from .train import train_model, write_train_log
from .verify import run_verification

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig().validate()
    if args.seed is not None:
        cfg = RunConfig(seed=args.seed, dataset=cfg.dataset, model=cfg.model,
                        loss=cfg.loss, train=cfg.train, eval=cfg.eval,
                        prob_loss=cfg.prob_loss)
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_gen_data(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    echo_config(cfg, out)
    write_dataset(out, cfg.seed, args.count, cfg.dataset.generator)
    print(f"wrote {args.count} samples under {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    echo_config(cfg, out)
    train_samples, eval_samples = build_run_datasets(cfg, cfg.seed)
    run_rng = Rng(cfg.seed)
    model = SegModel.build(cfg.model, run_rng.stream("init"))
    prob_loss = cfg.prob_loss if cfg.model.head == "conditional" else "none"
    from .experiments import augment_config
    result = train_model(model, train_samples, cfg.train, cfg.loss, prob_loss,
                         augment_config(cfg), run_rng,
                         checkpoint_on_abort=out / "checkpoint.cdnt")
    write_train_log(out / "train_log.csv", result.log)
    save_checkpoint(out / "checkpoint.cdnt", model.state_arrays())
    report = quick_eval(model, eval_samples)
    write_eval_report(out / "val_metrics.csv", report)
    print(f"final miou={report.miou:.6f} pixacc={report.pixacc:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    echo_config(cfg, out)
    if not args.checkpoint:
        raise ConfigError("eval requires --checkpoint")
    model = SegModel.build(cfg.model, Rng(cfg.seed).stream("init"))
    model.load_state_arrays(load_checkpoint(args.checkpoint))
    _, eval_samples = build_run_datasets(cfg, cfg.seed)
    report = evaluate_dataset(model, eval_samples, cfg.eval)
    write_eval_report(out / "metrics.csv", report)
    print(f"miou={report.miou:.6f} pixacc={report.pixacc:.6f}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    out = _out_dir(args) if args.out else None
    reports = run_verification(seed=args.seed if args.seed is not None else 2024)
    lines = [r.summary() for r in reports]
    for line in lines:
        print(line)
    if out is not None:
        (out / "gradcheck.txt").write_text("\n".join(lines) + "\n")
    if all(r.passed for r in reports):
        print(f"all {len(reports)} checks passed")
        return EXIT_OK
    raise NumericError("gradient check failed")


def cmd_compare(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    echo_config(cfg, out)
    seeds = [cfg.seed + k for k in range(args.seeds)]
    result = compare_heads(cfg, seeds, out / "compare.csv",
                           include_bias_free=args.bias_free_global)
    print(f"mean miou: global={result['means']['global'][0]:.6f} "
          f"conditional={result['means']['conditional'][0]:.6f} "
          f"delta={result['delta_miou']:.6f}")
    return EXIT_OK


def cmd_ablate_loss(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    echo_config(cfg, out)
    seeds = [cfg.seed + k for k in range(args.seeds)]
    result = ablate_prob_loss(cfg, seeds, out / "ablate_loss.csv")
    means = result["means"]
    print(" ".join(f"{c}={means[c]:.6f}" for c in ("none", "bce", "dice")))
    return EXIT_OK


def cmd_sweep_lambda(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    echo_config(cfg, out)
    seeds = [cfg.seed + k for k in range(args.seeds)]
    lambdas = [float(tok) for tok in args.lambdas.split(",")] if args.lambdas \
        else list(LAMBDA_GRID)
    result = sweep_prob_weight(cfg, lambdas, seeds, out / "sweep_lambda.csv")
    print(" ".join(f"{lam:g}:{m:.6f}" for lam, m in result["means"].items()))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="condseg",
        description="Conditional vs global per-pixel classifiers on synthetic scenes")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_out=True):
        p.add_argument("--config", type=Path, default=None,
                       help="JSON run config (defaults used when omitted)")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if needs_out:
            p.add_argument("--out", type=Path, required=True,
                           help="output directory")

    p = sub.add_parser("gen-data", help="write a PPM/PGM dataset directory")
    common(p)
    p.add_argument("--count", type=int, default=64, help="number of samples")
    p.set_defaults(fn=cmd_gen_data)

    p = sub.add_parser("train", help="train one model, write checkpoint + logs")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint with the full protocol")
    common(p)
    p.add_argument("--checkpoint", type=Path, required=True)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("gradcheck", help="run the gradient verification suite")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("compare", help="global vs conditional classifier")
    common(p)
    p.add_argument("--seeds", type=int, default=3, help="number of seeds")
    p.add_argument("--bias-free-global", action="store_true",
                   help="also run the bias-free global variant")
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("ablate-loss", help="probability-map loss ablation")
    common(p)
    p.add_argument("--seeds", type=int, default=5)
    p.set_defaults(fn=cmd_ablate_loss)

    p = sub.add_parser("sweep-lambda", help="loss-weight sweep")
    common(p)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--lambdas", type=str, default=None,
                   help="comma-separated weights (default: the standard grid)")
    p.set_defaults(fn=cmd_sweep_lambda)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, RangeError, DimensionError) as err:
        print(f"numeric failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ParseError, ChecksumError) as err:
        print(f"file error: {err}", file=sys.stderr)
        return EXIT_IO
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
