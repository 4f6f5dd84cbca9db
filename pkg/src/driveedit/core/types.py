"""Shared domain types for the driving-scene editing toolkit.

Images are float arrays in [0, 1], channel-last, row-major. Bounding boxes
are pixel rectangles (x0, y0, x1, y1), inclusive-exclusive. All types are
immutable after construction and safe to share across workers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

CLASS_LABELS = frozenset({
    "ambulance", "bicycle", "traffic light", "traffic cone", "person",
    "car", "motorcycle", "bus", "building", "fire truck",
})

# Vehicle-like classes, used for instruction generation and editable-subject
# selection. Buildings are static scenery; traffic lights are handled apart.
VEHICLE_CLASSES = frozenset({
    "ambulance", "bicycle", "car", "motorcycle", "bus", "fire truck",
})

WEATHER_VALUES = ("Sunny", "Cloudy", "Foggy", "Rainy", "Snowy")
TIME_OF_DAY_VALUES = ("Dawn", "Day", "Dusk", "Night")
SEASON_VALUES = ("Spring", "Summer", "Autumn", "Winter")
# The papers' global-attribute taxonomy names a scene type but gives no value
# set; this artifact-defined set is config-level, not a contract.
SCENE_TYPE_VALUES = ("urban", "suburban", "rural", "highway", "residential",
                     "industrial")

GLOBAL_ATTRIBUTE_VALUES = {
    "weather": WEATHER_VALUES,
    "time_of_day": TIME_OF_DAY_VALUES,
    "season": SEASON_VALUES,
    "scene_type": SCENE_TYPE_VALUES,
}

ACTIONS = ("insert", "delete", "modify", "replace")
EDIT_TYPES = ("local", "global", "compound", "identity")

Box = tuple[int, int, int, int]


def _check_box(bbox: Box) -> Box:
    x0, y0, x1, y1 = (int(v) for v in bbox)
    if not (0 <= x0 < x1 and 0 <= y0 < y1):
        raise ValueError(f"degenerate or negative bbox {bbox!r}")
    return (x0, y0, x1, y1)


def box_area(bbox: Box) -> int:
    x0, y0, x1, y1 = bbox
    return (x1 - x0) * (y1 - y0)


@dataclass(frozen=True)
class FramePose:
    """Camera position and roll/pitch/yaw for one log frame."""

    position: tuple[float, float, float]
    roll: float
    pitch: float
    yaw: float
    timestamp: int
    traversal_id: str
    frame_id: str

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        if len(self.position) != 3:
            raise ValueError("position must be a 3-vector of meters")
        for name in ("roll", "pitch", "yaw"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
            if abs(v) > math.pi + 1e-9:
                raise ValueError(f"{name}={v!r} outside [-pi, pi]")
        if not all(math.isfinite(v) for v in self.position):
            raise ValueError("position must be finite")


@dataclass(frozen=True)
class InstanceRecord:
    """One detected object: class, box, distance, and free-form attributes."""

    instance_id: str
    class_label: str
    bbox: Box
    distance_m: float
    attributes: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.class_label not in CLASS_LABELS:
            raise ValueError(f"unknown class label {self.class_label!r}")
        object.__setattr__(self, "bbox", _check_box(self.bbox))
        if not (self.distance_m > 0 and math.isfinite(self.distance_m)):
            raise ValueError(f"distance_m must be positive, got {self.distance_m!r}")


@dataclass(frozen=True)
class GlobalAttributes:
    weather: str
    time_of_day: str
    season: str
    scene_type: str

    def __post_init__(self):
        for name, values in GLOBAL_ATTRIBUTE_VALUES.items():
            v = getattr(self, name)
            if v not in values:
                raise ValueError(f"{name}={v!r} not in {values}")

    def as_dict(self) -> dict[str, str]:
        return {
            "weather": self.weather,
            "time_of_day": self.time_of_day,
            "season": self.season,
            "scene_type": self.scene_type,
        }


@dataclass(frozen=True)
class SceneAnnotation:
    """Hierarchical scene description: global attributes plus instances."""

    image_id: str
    width: int
    height: int
    global_attrs: GlobalAttributes
    instances: tuple[InstanceRecord, ...] = ()
    caption: str = ""
    caption_paraphrases: tuple[str, ...] = ()
    missing_facets: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "caption_paraphrases",
                           tuple(self.caption_paraphrases))
        object.__setattr__(self, "missing_facets", tuple(self.missing_facets))
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dims must be positive")
        if len(self.caption_paraphrases) > 4:
            raise ValueError("at most 4 caption paraphrases")
        for inst in self.instances:
            x0, y0, x1, y1 = inst.bbox
            if x1 > self.width or y1 > self.height:
                raise ValueError(
                    f"instance {inst.instance_id} bbox {inst.bbox} exceeds "
                    f"image bounds {self.width}x{self.height}")


@dataclass(frozen=True)
class EditSpec:
    """One instance-level edit: action, subject, box, and its sentence."""

    action: str
    subject_class: str
    bbox: Box
    distance_m: float
    instruction_sentence: str
    target_description: str | None = None

    def __post_init__(self):
        if self.action not in ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.subject_class not in CLASS_LABELS:
            raise ValueError(f"unknown class label {self.subject_class!r}")
        object.__setattr__(self, "bbox", _check_box(self.bbox))
        if not self.instruction_sentence:
            raise ValueError("instruction_sentence must be non-empty")
        if self.action == "delete":
            if self.target_description:
                raise ValueError("delete edits take no target description")
        elif not self.target_description:
            raise ValueError(f"{self.action} edits require a target description")


@dataclass(frozen=True)
class LangMask:
    """H x W x D tensor carrying one edit sentence embedding per box pixel.

    Every pixel is either all-zero or exactly one contributing spec's
    embedding vector; pixels outside the union of spec boxes are zero.
    """

    height: int
    width: int
    dim: int
    data: np.ndarray
    specs: tuple[EditSpec, ...] = ()

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float32)
        if data.shape != (self.height, self.width, self.dim):
            raise ValueError(
                f"mask data shape {data.shape} != "
                f"({self.height}, {self.width}, {self.dim})")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "specs", tuple(self.specs))

    @property
    def is_blank(self) -> bool:
        return not self.specs and not self.data.any()


@dataclass(frozen=True)
class TrainingSample:
    """(x_s, x_t, t_s, t_t, M_s, M_t) sextuple driving every objective.

    ``forward_instruction``/``forward_mask`` describe the source-to-target
    edit; the backward pair describes the inverse. Optional paraphrase
    variants feed cycle-instruction sampling during training.
    """

    pair_id: str
    source_image: np.ndarray
    target_image: np.ndarray
    forward_instruction: str
    backward_instruction: str
    forward_mask: LangMask
    backward_mask: LangMask
    edit_type: str
    forward_paraphrases: tuple[str, ...] = ()
    backward_paraphrases: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("source_image", "target_image"):
            img = np.ascontiguousarray(getattr(self, name), dtype=np.float32)
            if img.ndim != 3 or img.shape[2] != 3:
                raise ValueError(f"{name} must be HxWx3, got {img.shape}")
            img.setflags(write=False)
            object.__setattr__(self, name, img)
        if self.source_image.shape != self.target_image.shape:
            raise ValueError("source/target image shapes differ")
        if self.edit_type not in EDIT_TYPES:
            raise ValueError(f"unknown edit type {self.edit_type!r}")
        h, w = self.source_image.shape[:2]
        for name in ("forward_mask", "backward_mask"):
            m = getattr(self, name)
            if (m.height, m.width) != (h, w):
                raise ValueError(f"{name} dims {(m.height, m.width)} != image {(h, w)}")
        if self.edit_type == "identity":
            if not np.array_equal(self.source_image, self.target_image):
                raise ValueError("identity samples require source == target")
            if not (self.forward_mask.is_blank and self.backward_mask.is_blank):
                raise ValueError("identity samples require blank masks")
        object.__setattr__(self, "forward_paraphrases",
                           tuple(self.forward_paraphrases))
        object.__setattr__(self, "backward_paraphrases",
                           tuple(self.backward_paraphrases))


@dataclass(frozen=True)
class LossWeights:
    """Coefficients of the combined training objective."""

    sft: float = 3.0
    sft_lpips: float = 0.5
    id: float = 0.05
    id_lpips: float = 0.05
    cycle: float = 0.05
    cycle_lpips: float = 0.05
    clip: float = 3.0

    def __post_init__(self):
        for name in ("sft", "sft_lpips", "id", "id_lpips",
                     "cycle", "cycle_lpips", "clip"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"loss weight {name}={v!r} must be finite and >= 0")


def spec_to_dict(spec: EditSpec) -> dict:
    return {
        "action": spec.action,
        "subject_class": spec.subject_class,
        "bbox": list(spec.bbox),
        "distance_m": spec.distance_m,
        "instruction_sentence": spec.instruction_sentence,
        "target_description": spec.target_description,
    }


def spec_from_dict(d: dict) -> EditSpec:
    return EditSpec(
        action=d["action"],
        subject_class=d["subject_class"],
        bbox=tuple(d["bbox"]),
        distance_m=float(d["distance_m"]),
        instruction_sentence=d["instruction_sentence"],
        target_description=d.get("target_description"),
    )


def instance_to_dict(inst: InstanceRecord) -> dict:
    return {
        "instance_id": inst.instance_id,
        "class_label": inst.class_label,
        "bbox": list(inst.bbox),
        "distance_m": inst.distance_m,
        "attributes": dict(inst.attributes),
    }


def instance_from_dict(d: dict) -> InstanceRecord:
    return InstanceRecord(
        instance_id=d["instance_id"],
        class_label=d["class_label"],
        bbox=tuple(d["bbox"]),
        distance_m=float(d["distance_m"]),
        attributes=dict(d.get("attributes", {})),
    )


def annotation_to_dict(ann: SceneAnnotation) -> dict:
    return {
        "image_id": ann.image_id,
        "width": ann.width,
        "height": ann.height,
        "global": ann.global_attrs.as_dict(),
        "instances": [instance_to_dict(i) for i in ann.instances],
        "caption": ann.caption,
        "caption_paraphrases": list(ann.caption_paraphrases),
        "missing_facets": list(ann.missing_facets),
    }


def annotation_from_dict(d: dict) -> SceneAnnotation:
    return SceneAnnotation(
        image_id=d["image_id"],
        width=int(d["width"]),
        height=int(d["height"]),
        global_attrs=GlobalAttributes(**d["global"]),
        instances=tuple(instance_from_dict(i) for i in d.get("instances", ())),
        caption=d.get("caption", ""),
        caption_paraphrases=tuple(d.get("caption_paraphrases", ())),
        missing_facets=tuple(d.get("missing_facets", ())),
    )
