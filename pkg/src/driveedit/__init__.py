"""Toolkit for building instruction-guided driving-scene editing data.

Subpackages cover the full path from raw logs to a trained toy editor:
pose pairing, scene description, language masks, pseudo-pair synthesis,
quality control, the training objectives, a desk-scale trainer, the
evaluation protocol, and an interactive edit-session service.
"""
from . import banks, core, evalkit, langmask, objectives, pairing, poisson
from .core import (EditSpec, FramePose, GlobalAttributes, InstanceRecord,
                   LangMask, LossWeights, SceneAnnotation, TrainingSample)

__version__ = "0.1.0"

__all__ = [
    "banks", "core", "evalkit", "langmask", "objectives", "pairing",
    "poisson", "EditSpec", "FramePose", "GlobalAttributes", "InstanceRecord",
    "LangMask", "LossWeights", "SceneAnnotation", "TrainingSample",
    "__version__",
]
