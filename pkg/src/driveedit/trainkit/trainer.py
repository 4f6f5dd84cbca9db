"""Two-stage deterministic training loop over the toy generator.

Stage 1 optimizes the supervised and identity terms only; stage 2 turns
on the cycle and alignment terms. The loop is single threaded with a
fixed-rate stochastic gradient step, so a seed pins the entire loss
curve. Checkpoints reload bit-exactly through the binary container.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from ..core.types import LossWeights, TrainingSample
from ..objectives import loss_total
from .generator import PoolPerceptual, ToyClipEmbedder, ToyGenerator

STAGE1_WEIGHTS = LossWeights(sft=3.0, sft_lpips=0.5, id=0.05, id_lpips=0.05,
                             cycle=0.0, cycle_lpips=0.0, clip=0.0)
STAGE2_WEIGHTS = LossWeights()


class TrainingDivergedError(RuntimeError):
    """Raised when any loss term stops being finite."""


@dataclass(frozen=True)
class TrainConfig:
    stage1_steps: int = 500
    stage2_steps: int = 100
    batch_size: int = 8
    learning_rate: float = 0.05
    seed: int = 0
    text_dim: int = 16
    mask_dim: int = 16
    stage1_weights: LossWeights = STAGE1_WEIGHTS
    stage2_weights: LossWeights = STAGE2_WEIGHTS

    def __post_init__(self):
        if self.stage1_steps < 0 or self.stage2_steps < 0:
            raise ValueError("step counts must be non-negative")
        if self.batch_size <= 0:
            raise ValueError("batch_size must be positive")
        if self.stage1_weights.cycle or self.stage1_weights.cycle_lpips \
                or self.stage1_weights.clip:
            raise ValueError("stage 1 trains with the supervised and "
                             "identity terms only")

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        for key in ("stage1_weights", "stage2_weights"):
            if key in d and isinstance(d[key], dict):
                d[key] = LossWeights(**d[key])
        return cls(**d)


@dataclass
class TrainResult:
    generator: ToyGenerator
    log: list[dict] = field(default_factory=list)
    checkpoint_path: str | None = None
    log_path: str | None = None


def _batch_indices(rng: np.random.Generator, n: int, size: int) -> list[int]:
    return [int(i) for i in rng.integers(n, size=size)]


def train(config: TrainConfig, dataset: list[TrainingSample],
          out_dir: str | None = None,
          generator: ToyGenerator | None = None) -> TrainResult:
    """Run both stages; returns the model, per-step logs, and file paths."""
    if not dataset:
        raise ValueError("dataset is empty")
    torch.manual_seed(config.seed)
    torch.set_num_threads(1)
    gen = generator or ToyGenerator(text_dim=config.text_dim,
                                    mask_dim=config.mask_dim, seed=config.seed)
    phi = PoolPerceptual()
    embedder = ToyClipEmbedder(dim=config.text_dim, seed=config.seed)
    opt = torch.optim.SGD(gen.parameters(), lr=config.learning_rate)
    rng = np.random.default_rng(config.seed)
    log: list[dict] = []
    total_steps = config.stage1_steps + config.stage2_steps
    for step in range(total_steps):
        stage = 1 if step < config.stage1_steps else 2
        w = config.stage1_weights if stage == 1 else config.stage2_weights
        idx = _batch_indices(rng, len(dataset), config.batch_size)
        opt.zero_grad()
        batch_total = 0.0
        sums = {"sft": 0.0, "id": 0.0, "cycle": 0.0, "clip": 0.0}
        for i in idx:
            total, breakdown = loss_total(dataset[i], gen, phi, embedder, w,
                                          rng=rng)
            batch_total = batch_total + total
            for k, v in breakdown.items():
                sums[k] += v
        batch_total = batch_total / len(idx)
        record = {"step": step, "stage": stage,
                  "total": float(batch_total.detach())
                  if isinstance(batch_total, torch.Tensor)
                  else float(batch_total),
                  **{k: v / len(idx) for k, v in sums.items()}}
        if not all(math.isfinite(v) for k, v in record.items() if k != "stage"):
            raise TrainingDivergedError(
                f"non-finite loss at step {step}: {record}")
        log.append(record)
        if isinstance(batch_total, torch.Tensor):
            batch_total.backward()
            opt.step()
    result = TrainResult(generator=gen, log=log)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.checkpoint_path = os.path.join(out_dir, "generator.ckpt")
        gen.save(result.checkpoint_path,
                 meta={"steps": total_steps, "seed": config.seed})
        result.log_path = os.path.join(out_dir, "metrics.jsonl")
        with open(result.log_path, "w", encoding="utf-8") as f:
            for record in log:
                f.write(json.dumps(record) + "\n")
    return result


def evaluate_checkpoint(generator: ToyGenerator | str,
                        heldout: list[TrainingSample],
                        providers: dict | None = None) -> dict:
    """Held-out metrics via the evaluation module; accepts a model or a
    checkpoint path."""
    from ..evalkit import evaluate_records

    if isinstance(generator, str):
        generator = ToyGenerator.from_checkpoint(generator)
    providers = providers or {"clip": ToyClipEmbedder(seed=1),
                              "dino": ToyClipEmbedder(seed=2)}
    records = []
    with torch.no_grad():
        for sample in heldout:
            out = generator.apply(sample.source_image,
                                  sample.forward_instruction,
                                  sample.forward_mask)
            records.append((sample, out.detach().cpu().numpy()))
    return evaluate_records(records, providers)
