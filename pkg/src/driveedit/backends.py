"""Pluggable model backends and their deterministic offline mocks.

Real detectors, segmenters, depth estimators, captioners, editors, and
super-resolution models plug in behind these small interfaces. The mock
variants are pure functions of the input bytes (plus a constructor seed),
so every pipeline stage runs offline and reproducibly.
"""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .banks import TRAFFIC_LIGHT_COLORS, VEHICLE_COLORS
from .core import (
    SCENE_TYPE_VALUES,
    SEASON_VALUES,
    TIME_OF_DAY_VALUES,
    WEATHER_VALUES,
)
from .core.images import as_float_image, resize_image


def image_key(img: np.ndarray) -> str:
    """Stable content hash of an image array (shape-aware)."""
    arr = np.ascontiguousarray(img, dtype=np.float32)
    h = hashlib.sha256()
    h.update(str(arr.shape).encode())
    h.update(arr.tobytes())
    return h.hexdigest()


def _rng_from(*parts) -> np.random.Generator:
    h = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return np.random.default_rng(int.from_bytes(h[:8], "little"))


class BackendError(RuntimeError):
    """A backend failed; callers flag the facet rather than fabricate it."""


# --- detection ---------------------------------------------------------------

Detection = tuple[str, tuple[int, int, int, int], float]


class Detector(Protocol):
    def detect(self, image: np.ndarray) -> list[Detection]: ...


class StaticDetector:
    """Returns the same detections for every image."""

    def __init__(self, detections: list[Detection] | None = None):
        self.detections = list(detections or [])

    def detect(self, image):
        return list(self.detections)


class FixtureDetector:
    """Looks detections up by image content hash from a fixture mapping."""

    def __init__(self, fixture: dict[str, list] | str):
        if isinstance(fixture, str):
            with open(fixture, "r", encoding="utf-8") as f:
                fixture = json.load(f)
        self.fixture = {
            key: [(d["class_label"], tuple(d["bbox"]), float(d["score"]))
                  for d in dets]
            for key, dets in fixture.items()
        }

    def detect(self, image):
        return list(self.fixture.get(image_key(image), []))


# --- segmentation ------------------------------------------------------------

class Segmenter(Protocol):
    def segment(self, image: np.ndarray, bbox) -> np.ndarray: ...


class EllipseSegmenter:
    """Mock instance mask: the ellipse inscribed in the bounding box."""

    def segment(self, image, bbox):
        h, w = image.shape[:2]
        x0, y0, x1, y1 = bbox
        yy, xx = np.mgrid[0:h, 0:w]
        cx, cy = (x0 + x1 - 1) / 2.0, (y0 + y1 - 1) / 2.0
        rx, ry = max((x1 - x0) / 2.0, 0.5), max((y1 - y0) / 2.0, 0.5)
        return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


class BoxSegmenter:
    """Mock instance mask: the full bounding box."""

    def segment(self, image, bbox):
        h, w = image.shape[:2]
        x0, y0, x1, y1 = bbox
        mask = np.zeros((h, w), dtype=bool)
        mask[y0:y1, x0:x1] = True
        return mask


# --- depth -------------------------------------------------------------------

class DepthBackend(Protocol):
    def depth(self, image: np.ndarray) -> np.ndarray: ...


class ConstantDepth:
    def __init__(self, value: float = 12.0):
        self.value = float(value)

    def depth(self, image):
        return np.full(image.shape[:2], self.value, dtype=np.float64)


class RampDepth:
    """Left-to-right linear ramp from ``near`` to ``far`` meters."""

    def __init__(self, near: float = 0.0, far: float = 50.0):
        self.near, self.far = float(near), float(far)

    def depth(self, image):
        h, w = image.shape[:2]
        xs = np.linspace(self.near, self.far, w, dtype=np.float64)
        return np.tile(xs, (h, 1))


# --- captioning --------------------------------------------------------------

class Captioner(Protocol):
    def scene_record(self, image: np.ndarray, prompt: str) -> dict: ...
    def choose(self, image: np.ndarray, field: str, allowed) -> str: ...
    def instance_record(self, crop: np.ndarray, class_label: str) -> dict: ...


class MockCaptioner:
    """Seeded template captioner; a pure function of the input bytes.

    ``off_vocab_fields`` makes the first scene_record answer come back in a
    non-canonical casing so the closed-set re-prompt path gets exercised.
    """

    def __init__(self, seed: int = 0, off_vocab_fields: tuple[str, ...] = ()):
        self.seed = seed
        self.off_vocab_fields = frozenset(off_vocab_fields)

    def _pick(self, image, field: str, values) -> str:
        rng = _rng_from(self.seed, "scene", field, image_key(image))
        return values[int(rng.integers(len(values)))]

    def scene_record(self, image, prompt=""):
        record = {
            "weather": self._pick(image, "weather", WEATHER_VALUES),
            "time_of_day": self._pick(image, "time_of_day", TIME_OF_DAY_VALUES),
            "season": self._pick(image, "season", SEASON_VALUES),
            "scene_type": self._pick(image, "scene_type", SCENE_TYPE_VALUES),
        }
        for f in self.off_vocab_fields:
            record[f] = record[f].lower()
        caption = ("a {scene_type} driving scene on a {weather} {season} "
                   "{time_of_day}").format(
                       scene_type=record["scene_type"],
                       weather=record["weather"].lower(),
                       season=record["season"].lower(),
                       time_of_day=record["time_of_day"].lower())
        record["caption"] = caption
        record["caption_paraphrases"] = [
            f"view of {caption}",
            f"{caption}, seen from the ego vehicle",
            f"driving footage showing {caption}",
        ]
        return record

    def choose(self, image, field, allowed):
        allowed = list(allowed)
        rng = _rng_from(self.seed, "choose", field, image_key(image))
        return allowed[int(rng.integers(len(allowed)))]

    def instance_record(self, crop, class_label):
        rng = _rng_from(self.seed, "instance", class_label, image_key(crop))
        attrs: dict[str, str] = {}
        if class_label == "traffic light":
            color = TRAFFIC_LIGHT_COLORS[int(rng.integers(len(TRAFFIC_LIGHT_COLORS)))]
            attrs["light_state"] = color
            attrs["description"] = f"{color} traffic light"
        elif class_label == "person":
            attrs["description"] = "person"
        else:
            color = VEHICLE_COLORS[int(rng.integers(len(VEHICLE_COLORS)))]
            attrs["color"] = color
            attrs["description"] = f"{color} {class_label}"
        return attrs


class FailingCaptioner:
    def scene_record(self, image, prompt=""):
        raise BackendError("captioner unavailable")

    def choose(self, image, field, allowed):
        raise BackendError("captioner unavailable")

    def instance_record(self, crop, class_label):
        raise BackendError("captioner unavailable")


# --- instruction LLM ---------------------------------------------------------

class EchoDiffLLM:
    """Mock instruction LLM: phrases each attribute change with the bank
    templates and joins them into one sentence."""

    def instruction_from_diff(self, changes: list[tuple[str, str, str]]) -> str:
        from .banks import global_edit_sentence

        if not changes:
            return "keep the overall scene appearance unchanged"
        return "; ".join(global_edit_sentence(cat, to)
                         for cat, _frm, to in changes)


class FailingLLM:
    def instruction_from_diff(self, changes):
        raise BackendError("llm unavailable")


# --- pair verification -------------------------------------------------------

class PairVerifier(Protocol):
    def same_scene(self, a: np.ndarray, b: np.ndarray) -> bool: ...
    def change_applied(self, a: np.ndarray, b: np.ndarray, instruction: str) -> bool: ...


class HeuristicVerifier:
    """Stand-in scene verifier: same shape and bounded drift means same
    scene; any pixel difference at all counts as an applied change."""

    def __init__(self, max_drift: float = 0.5):
        self.max_drift = max_drift

    def same_scene(self, a, b):
        return a.shape == b.shape and float(np.mean(np.abs(a - b))) <= self.max_drift

    def change_applied(self, a, b, instruction):
        return a.shape != b.shape or bool(np.any(a != b))


# --- generators --------------------------------------------------------------

class GeneratorBackend(Protocol):
    def edit(self, image: np.ndarray, instruction: str,
             mask=None) -> np.ndarray: ...


class IdentityGenerator:
    def edit(self, image, instruction, mask=None):
        return np.array(image, dtype=np.float32, copy=True)


class BrightenGenerator:
    def __init__(self, delta: float = 0.1):
        self.delta = delta

    def edit(self, image, instruction, mask=None):
        return np.clip(as_float_image(image) + self.delta, 0.0, 1.0)


_COLOR_RGB = {
    "red": (0.8, 0.1, 0.1), "blue": (0.1, 0.2, 0.8), "green": (0.1, 0.7, 0.2),
    "yellow": (0.9, 0.85, 0.1), "black": (0.05, 0.05, 0.05),
    "white": (0.95, 0.95, 0.95), "silver": (0.75, 0.75, 0.78),
    "grey": (0.5, 0.5, 0.5),
}


class KeywordTintGenerator:
    """Mock editor: blends the image halfway toward the first color word
    found in the instruction; darkens slightly when asked to remove."""

    def __init__(self, strength: float = 0.5):
        self.strength = strength

    def edit(self, image, instruction, mask=None):
        img = as_float_image(image)
        words = instruction.lower()
        for name, rgb in _COLOR_RGB.items():
            if name in words:
                target = np.array(rgb, dtype=np.float32)
                return np.clip(img * (1 - self.strength) + target * self.strength,
                               0.0, 1.0)
        if "remove" in words or "delete" in words:
            return np.clip(img * 0.6, 0.0, 1.0)
        return np.clip(img * (1 - 0.2) + 0.2 * img.mean(), 0.0, 1.0)


# --- super-resolution --------------------------------------------------------

class BicubicUpscaler:
    """Stand-in for a learned super-resolution backend."""

    def __init__(self, factor: int = 2):
        self.factor = factor

    def upscale(self, image):
        h, w = image.shape[:2]
        return resize_image(image, h * self.factor, w * self.factor)


# --- embeddings --------------------------------------------------------------

class EmbeddingProvider(Protocol):
    dim: int

    def text_embed(self, text: str) -> np.ndarray: ...
    def image_embed(self, image: np.ndarray) -> np.ndarray: ...


class HashEmbeddingProvider:
    """Seeded hash-projected unit vectors; deterministic per input."""

    def __init__(self, dim: int = 64, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def _unit(self, *parts) -> np.ndarray:
        rng = _rng_from(self.seed, self.dim, *parts)
        v = rng.standard_normal(self.dim)
        v /= np.linalg.norm(v)
        return v.astype(np.float32)

    def text_embed(self, text):
        return self._unit("text", text)

    def image_embed(self, image):
        return self._unit("image", image_key(image))


# --- concurrency adapter -----------------------------------------------------

class SerializedBackend:
    """Wraps a backend so every method call holds one lock; use around
    backends that are not safe for concurrent invocation."""

    def __init__(self, inner):
        self._inner = inner
        self._lock = threading.Lock()

    def __getattr__(self, name):
        attr = getattr(self._inner, name)
        if not callable(attr):
            return attr

        def locked(*args, **kwargs):
            with self._lock:
                return attr(*args, **kwargs)

        return locked


# --- grouped bundles and config loading --------------------------------------

@dataclass
class DescriptorBackends:
    detector: Detector
    segmenter: Segmenter
    depth: DepthBackend
    captioner: Captioner
    score_threshold: float = 0.3


def _build_one(kind: str, spec: dict):
    opts = {k: v for k, v in spec.items() if k != "kind"}
    name = spec.get("kind", "default")
    table = {
        "detector": {"static": StaticDetector, "fixture": FixtureDetector,
                     "default": StaticDetector},
        "segmenter": {"ellipse": EllipseSegmenter, "box": BoxSegmenter,
                      "default": EllipseSegmenter},
        "depth": {"constant": ConstantDepth, "ramp": RampDepth,
                  "default": ConstantDepth},
        "captioner": {"mock": MockCaptioner, "default": MockCaptioner},
        "generator": {"identity": IdentityGenerator,
                      "brighten": BrightenGenerator,
                      "keyword_tint": KeywordTintGenerator,
                      "default": IdentityGenerator},
        "verifier": {"heuristic": HeuristicVerifier,
                     "default": HeuristicVerifier},
        "sr": {"bicubic": BicubicUpscaler, "default": BicubicUpscaler},
        "embedding": {"hash": HashEmbeddingProvider,
                      "default": HashEmbeddingProvider},
        "llm": {"echo": EchoDiffLLM, "default": EchoDiffLLM},
    }
    try:
        cls = table[kind][name]
    except KeyError:
        raise ValueError(f"unknown backend {kind}.{name}") from None
    if kind == "detector" and name == "fixture":
        return cls(opts["path"])
    return cls(**opts)


def load_backend_config(path: str) -> dict:
    """Build the backend suite named by a JSON config file.

    Config shape: ``{"detector": {"kind": "fixture", "path": ...}, ...}``;
    missing sections fall back to the mock defaults.
    """
    with open(path, "r", encoding="utf-8") as f:
        cfg = json.load(f)
    suite = {}
    for kind in ("detector", "segmenter", "depth", "captioner", "generator",
                 "verifier", "sr", "embedding", "llm"):
        suite[kind] = _build_one(kind, cfg.get(kind, {}))
    suite["score_threshold"] = cfg.get("score_threshold", 0.3)
    suite["prompt_path"] = cfg.get("prompt_path")
    return suite


def default_backend_suite(seed: int = 0) -> dict:
    return {
        "detector": StaticDetector(),
        "segmenter": EllipseSegmenter(),
        "depth": ConstantDepth(),
        "captioner": MockCaptioner(seed=seed),
        "generator": IdentityGenerator(),
        "verifier": HeuristicVerifier(),
        "sr": BicubicUpscaler(),
        "embedding": HashEmbeddingProvider(seed=seed),
        "llm": EchoDiffLLM(),
        "score_threshold": 0.3,
        "prompt_path": None,
    }


def descriptor_backends(suite: dict) -> DescriptorBackends:
    return DescriptorBackends(
        detector=suite["detector"],
        segmenter=suite["segmenter"],
        depth=suite["depth"],
        captioner=suite["captioner"],
        score_threshold=suite.get("score_threshold", 0.3),
    )
