"""Dataset directory layout and manifest handling.

Layout: ``<root>/images/%06d.ppm``, ``<root>/masks/%06d.pgm``, plus a
``manifest.json`` echoing {class_count, size, seeds, generator config}.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .errors import ConfigError
from .netpbm import read_pgm, read_ppm, write_pgm, write_ppm
from .rng import Rng
from .scenes import GeneratorConfig, SceneProvenance, SceneSample, generate_scene

MANIFEST_NAME = "manifest.json"


def generator_config_dict(cfg: GeneratorConfig) -> dict:
    d = dataclasses.asdict(cfg.resolve())
    d["class_hue_intervals"] = [list(pair) for pair in d["class_hue_intervals"]]
    return d


def write_dataset(root: Path, base_seed: int, count: int,
                  cfg: GeneratorConfig) -> list[Path]:
    """Generate ``count`` samples from seeds base_seed..base_seed+count-1."""
    cfg = cfg.resolve()
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "masks").mkdir(parents=True, exist_ok=True)
    written = []
    seeds = [base_seed + i for i in range(count)]
    for i, seed in enumerate(seeds):
        sample = generate_scene(Rng(seed), cfg)
        img_path = root / "images" / f"{i:06d}.ppm"
        mask_path = root / "masks" / f"{i:06d}.pgm"
        img_path.write_bytes(write_ppm(sample.image))
        mask_path.write_bytes(write_pgm(sample.mask))
        written.extend([img_path, mask_path])
    manifest = {
        "class_count": cfg.num_classes,
        "size": [cfg.canvas, cfg.canvas],
        "seeds": seeds,
        "generator": generator_config_dict(cfg),
    }
    manifest_path = root / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    written.append(manifest_path)
    return written


def load_dataset(root: Path) -> tuple[list[SceneSample], dict]:
    root = Path(root)
    manifest_path = root / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ConfigError(f"no {MANIFEST_NAME} under {root}")
    manifest = json.loads(manifest_path.read_text())
    seeds = manifest.get("seeds", [])
    samples = []
    for i, seed in enumerate(seeds):
        img_path = root / "images" / f"{i:06d}.ppm"
        mask_path = root / "masks" / f"{i:06d}.pgm"
        if not img_path.is_file() or not mask_path.is_file():
            raise ConfigError(f"dataset file missing for index {i} under {root}")
        image = read_ppm(img_path.read_bytes())
        mask = read_pgm(mask_path.read_bytes())
        samples.append(SceneSample(image=image, mask=mask,
                                   provenance=SceneProvenance(seed=seed)))
    return samples, manifest
