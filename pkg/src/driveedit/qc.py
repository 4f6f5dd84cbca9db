"""Quality control for generated edit pairs.

Every candidate pair passes a global sanity gate and then one
class-specific gate chosen by the edit's action and subject. Semantic
judgments come from a pluggable vision-language backend; structural
judgments compare Canny edge maps of the original and edited crops with
SSIM so removals cannot hide wholesale background rewrites.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol

import numpy as np
from skimage.color import rgb2gray
from skimage.feature import canny
from skimage.metrics import structural_similarity

from .backends import BackendError, BicubicUpscaler
from .core.images import as_float_image, crop
from .pseudogen import LocalEditProvenance

QC_STAGES = (
    "global_sanity", "pedestrian", "vehicle_orientation",
    "removal_semantic", "removal_structural", "trafficlight_presence",
    "trafficlight_color", "trafficlight_structural",
)

ORIENTATIONS = ("forward", "backward", "left", "right", "ambiguous")


@dataclass(frozen=True)
class QCVerdict:
    accepted: bool
    stage: str
    score: float | None = None
    reason: str = ""

    def __post_init__(self):
        if self.stage not in QC_STAGES:
            raise ValueError(f"unknown QC stage {self.stage!r}")
        if not self.accepted and not self.reason:
            raise ValueError("rejected verdicts need a reason")

    def to_dict(self) -> dict:
        return {"accepted": self.accepted, "stage": self.stage,
                "score": self.score, "reason": self.reason}


@dataclass(frozen=True)
class EdgeParams:
    """Canny parameters: Gaussian sigma and hysteresis thresholds applied
    to the gradient magnitude of the [0, 1] grayscale image."""

    sigma: float = 1.4
    low: float = 0.1
    high: float = 0.3


@dataclass(frozen=True)
class QCConfig:
    edge: EdgeParams = EdgeParams()
    ssim_threshold: float = 0.35
    ssim_win_size: int = 7
    enlarge_factor: int = 2


DEFAULT_QC = QCConfig()


class QCVLM(Protocol):
    """Semantic judgments required by the gates."""

    def scene_plausible(self, original: np.ndarray, edited: np.ndarray) -> bool: ...
    def sees(self, crop: np.ndarray, class_label: str) -> bool: ...
    def light_state(self, crop: np.ndarray) -> str | None: ...
    def person_realistic(self, crop: np.ndarray) -> bool: ...
    def vehicle_orientation(self, crop: np.ndarray) -> str: ...


@dataclass
class ScriptedQCVLM:
    """Fixed-answer judge for tests and fixtures."""

    plausible: bool = True
    present: bool = False
    state: str | None = "green"
    realistic: bool = True
    orientation: str = "forward"

    def scene_plausible(self, original, edited):
        return self.plausible

    def sees(self, crop, class_label):
        return self.present

    def light_state(self, crop):
        return self.state

    def person_realistic(self, crop):
        return self.realistic

    def vehicle_orientation(self, crop):
        return self.orientation


class HeuristicQCVLM:
    """Deterministic pixel-statistic stand-in for a real judge."""

    def scene_plausible(self, original, edited):
        a, b = as_float_image(original), as_float_image(edited)
        return a.shape == b.shape and float(np.mean(np.abs(a - b))) <= 0.5

    def sees(self, crop, class_label):
        return float(as_float_image(crop).std()) > 0.08

    def light_state(self, crop):
        img = as_float_image(crop)
        r, g, _ = img.reshape(-1, 3).mean(axis=0)
        if r > 1.2 * g:
            return "red"
        if g > 1.2 * r:
            return "green"
        return "yellow"

    def person_realistic(self, crop):
        return float(as_float_image(crop).std()) > 0.02

    def vehicle_orientation(self, crop):
        img = as_float_image(crop)
        half = img.shape[1] // 2
        if half == 0:
            return "ambiguous"
        diff = float(img[:, :half].mean() - img[:, half:].mean())
        if abs(diff) < 1e-3:
            return "ambiguous"
        return "left" if diff > 0 else "right"


class FailingQCVLM:
    def _fail(self, *args, **kwargs):
        raise BackendError("qc vlm unavailable")

    scene_plausible = sees = light_state = _fail
    person_realistic = vehicle_orientation = _fail


def _gray(img: np.ndarray) -> np.ndarray:
    img = as_float_image(img)
    return rgb2gray(img) if img.ndim == 3 else img


def edge_maps(crop_a: np.ndarray, crop_b: np.ndarray,
              edge: EdgeParams = DEFAULT_QC.edge) -> tuple[np.ndarray, np.ndarray]:
    ga, gb = _gray(crop_a), _gray(crop_b)
    kw = dict(sigma=edge.sigma, low_threshold=edge.low, high_threshold=edge.high)
    return canny(ga, **kw), canny(gb, **kw)


def edge_ssim(crop_a: np.ndarray, crop_b: np.ndarray,
              edge: EdgeParams = DEFAULT_QC.edge,
              win_size: int = DEFAULT_QC.ssim_win_size) -> float:
    """SSIM between the binary Canny edge maps of two aligned crops."""
    a, b = as_float_image(crop_a), as_float_image(crop_b)
    if a.shape != b.shape:
        raise ValueError(f"crop shapes differ: {a.shape} vs {b.shape}")
    if min(a.shape[:2]) < 8:
        raise ValueError("crops must be at least 8x8")
    ea, eb = edge_maps(a, b, edge)
    if np.array_equal(ea, eb):
        return 1.0
    win = min(win_size, min(s - (s + 1) % 2 for s in ea.shape))
    return float(structural_similarity(ea.astype(np.float64),
                                       eb.astype(np.float64),
                                       win_size=win, data_range=1.0))


def check_removal(original_crop: np.ndarray, edited_crop: np.ndarray,
                  class_label: str, vlm: QCVLM,
                  threshold: float = DEFAULT_QC.ssim_threshold,
                  edge: EdgeParams = DEFAULT_QC.edge) -> QCVerdict:
    """Removal passes only if the class is gone and the backdrop survived."""
    try:
        present = vlm.sees(edited_crop, class_label)
    except BackendError as exc:
        return QCVerdict(False, "removal_semantic", reason=str(exc))
    if present:
        return QCVerdict(False, "removal_semantic",
                         reason=f"{class_label} still visible after removal")
    score = edge_ssim(original_crop, edited_crop, edge)
    if score < threshold:
        return QCVerdict(False, "removal_structural", score=score,
                         reason=f"edge similarity {score:.3f} below {threshold}")
    return QCVerdict(True, "removal_structural", score=score)


def check_trafficlight(original_crop: np.ndarray, edited_crop: np.ndarray,
                       target_color: str, vlm: QCVLM,
                       threshold: float = DEFAULT_QC.ssim_threshold,
                       edge: EdgeParams = DEFAULT_QC.edge) -> QCVerdict:
    """A recolored light must still be a light, show the requested color,
    and keep its housing structure."""
    try:
        state = vlm.light_state(edited_crop)
    except BackendError as exc:
        return QCVerdict(False, "trafficlight_presence", reason=str(exc))
    if state is None:
        return QCVerdict(False, "trafficlight_presence",
                         reason="no traffic light detected after edit")
    if state != target_color:
        return QCVerdict(False, "trafficlight_color",
                         reason=f"light shows {state!r}, wanted {target_color!r}")
    score = edge_ssim(original_crop, edited_crop, edge)
    if score < threshold:
        return QCVerdict(False, "trafficlight_structural", score=score,
                         reason=f"edge similarity {score:.3f} below {threshold}")
    return QCVerdict(True, "trafficlight_structural", score=score)


def check_pedestrian(edited_crop: np.ndarray, intended_edit: str,
                     vlm: QCVLM) -> QCVerdict:
    try:
        ok = vlm.person_realistic(edited_crop)
    except BackendError as exc:
        return QCVerdict(False, "pedestrian", reason=str(exc))
    if not ok:
        return QCVerdict(False, "pedestrian",
                         reason="edited person judged unrealistic")
    return QCVerdict(True, "pedestrian")


def check_vehicle(edited_crop: np.ndarray, intended_edit: str,
                  vlm: QCVLM) -> QCVerdict:
    """Orientation must be decided, and must match the instruction when
    the instruction names one."""
    try:
        orientation = vlm.vehicle_orientation(edited_crop)
    except BackendError as exc:
        return QCVerdict(False, "vehicle_orientation", reason=str(exc))
    if orientation == "ambiguous":
        return QCVerdict(False, "vehicle_orientation",
                         reason="vehicle orientation ambiguous")
    words = intended_edit.lower()
    expected = next((o for o in ORIENTATIONS[:4] if o in words), None)
    if expected is not None and orientation != expected:
        return QCVerdict(False, "vehicle_orientation",
                         reason=f"vehicle faces {orientation}, "
                                f"instruction wants {expected}")
    return QCVerdict(True, "vehicle_orientation")


def _enlarge(img: np.ndarray, factor: int) -> np.ndarray:
    return BicubicUpscaler(factor).upscale(img) if factor > 1 else img


def run_qc(sample, provenance: LocalEditProvenance, vlm: QCVLM,
           cfg: QCConfig = DEFAULT_QC) -> QCVerdict:
    """Global sanity first, then the class gate; first rejection wins."""
    if provenance.pseudo_is_target:
        original, pseudo = sample.source_image, sample.target_image
    else:
        original, pseudo = sample.target_image, sample.source_image
    try:
        plausible = vlm.scene_plausible(original, pseudo)
    except BackendError as exc:
        return QCVerdict(False, "global_sanity", reason=str(exc))
    if not plausible:
        return QCVerdict(False, "global_sanity",
                         reason="edited frame fails scene sanity")

    inst = provenance.instance
    before = _enlarge(provenance.original_crop, cfg.enlarge_factor)
    after = _enlarge(crop(pseudo, inst.bbox), cfg.enlarge_factor)
    if inst.class_label == "traffic light":
        color = (provenance.target_value or "").split()[0]
        return check_trafficlight(before, after, color, vlm,
                                  cfg.ssim_threshold, cfg.edge)
    if provenance.action == "delete":
        return check_removal(before, after, inst.class_label, vlm,
                             cfg.ssim_threshold, cfg.edge)
    if inst.class_label == "person":
        return check_pedestrian(after, provenance.prompt, vlm)
    return check_vehicle(after, provenance.prompt, vlm)
