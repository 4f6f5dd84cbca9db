"""Desk-scale training harness: synthetic scenes, toy generator, trainer."""
from .generator import PoolPerceptual, ToyClipEmbedder, ToyGenerator
from .synthetic import IDENTITY_INSTRUCTION, MASK_DIM, SIZE, make_synthetic_dataset
from .trainer import (STAGE1_WEIGHTS, STAGE2_WEIGHTS, TrainConfig, TrainResult,
                      TrainingDivergedError, evaluate_checkpoint, train)

__all__ = [
    "PoolPerceptual", "ToyClipEmbedder", "ToyGenerator",
    "IDENTITY_INSTRUCTION", "MASK_DIM", "SIZE", "make_synthetic_dataset",
    "STAGE1_WEIGHTS", "STAGE2_WEIGHTS", "TrainConfig", "TrainResult",
    "TrainingDivergedError", "evaluate_checkpoint", "train",
]
