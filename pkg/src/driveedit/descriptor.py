"""Scene annotation orchestrator.

Composes detector, segmenter, metric-depth, and captioner backends into
hierarchical SceneAnnotation records: global attributes constrained to the
closed value sets, plus per-instance class, box, masked mean depth, and
appearance attributes. With all-mock backends the pipeline is a pure
function of the image bytes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .backends import BackendError, DescriptorBackends
from .banks import REMOVE_ALL_TRAFFIC_SENTENCE, build_sentence, template_for
from .core import (
    GLOBAL_ATTRIBUTE_VALUES,
    VEHICLE_CLASSES,
    EditSpec,
    GlobalAttributes,
    InstanceRecord,
    SceneAnnotation,
)
from .core.images import crop
from .langmask import DEFAULT_RULES, FilterRules, filter_instances

GLOBAL_EDIT_CATEGORIES = ("weather", "time_of_day", "season")

# Distance floor keeps the record invariant intact under degenerate depth
# mocks (e.g. a ramp starting at zero).
_MIN_DISTANCE_M = 1e-3


def load_vlm_prompt(path: str | None = None) -> str:
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            template = f.read()
    else:
        template = resources.files("driveedit.data").joinpath(
            "vlm_prompt.txt").read_text(encoding="utf-8")
    return template.format(
        weather_values=", ".join(GLOBAL_ATTRIBUTE_VALUES["weather"]),
        time_of_day_values=", ".join(GLOBAL_ATTRIBUTE_VALUES["time_of_day"]),
        season_values=", ".join(GLOBAL_ATTRIBUTE_VALUES["season"]),
        scene_type_values=", ".join(GLOBAL_ATTRIBUTE_VALUES["scene_type"]),
    )


def _nearest_match(value, field_name, allowed, image, captioner):
    """Case-insensitive exact match first, otherwise re-prompt the captioner
    with the closed set."""
    if isinstance(value, str):
        for v in allowed:
            if v.lower() == value.strip().lower():
                return v
    return captioner.choose(image, field_name, allowed)


def annotate(image: np.ndarray, backends: DescriptorBackends,
             image_id: str | None = None,
             prompt: str | None = None) -> SceneAnnotation:
    """Produce a SceneAnnotation; backend failures flag the facet in
    ``missing_facets`` with neutral placeholders, never silent fabrication."""
    if image.size == 0:
        raise ValueError("image must be non-empty")
    from .backends import image_key

    h, w = image.shape[:2]
    image_id = image_id or image_key(image)[:16]
    prompt = prompt or load_vlm_prompt()
    missing: list[str] = []

    values = {name: allowed[0] for name, allowed in GLOBAL_ATTRIBUTE_VALUES.items()}
    caption, paraphrases = "", ()
    try:
        record = backends.captioner.scene_record(image, prompt)
        for name, allowed in GLOBAL_ATTRIBUTE_VALUES.items():
            values[name] = _nearest_match(record.get(name), name, allowed,
                                          image, backends.captioner)
        caption = record.get("caption", "")
        paraphrases = tuple(record.get("caption_paraphrases", ()))[:4]
    except BackendError:
        missing.append("global_attributes")

    try:
        detections = [d for d in backends.detector.detect(image)
                      if d[2] >= backends.score_threshold]
    except BackendError:
        detections = []
        missing.append("detections")

    depth_map = None
    if detections:
        try:
            depth_map = np.asarray(backends.depth.depth(image), dtype=np.float64)
        except BackendError:
            missing.append("depth")

    instances = []
    for i, (class_label, bbox, _score) in enumerate(detections):
        x0, y0, x1, y1 = bbox
        bbox = (max(0, x0), max(0, y0), min(w, x1), min(h, y1))
        if bbox[0] >= bbox[2] or bbox[1] >= bbox[3]:
            continue
        distance = 1.0
        if depth_map is not None:
            try:
                seg = np.asarray(backends.segmenter.segment(image, bbox), dtype=bool)
                region = np.zeros((h, w), dtype=bool)
                region[bbox[1]:bbox[3], bbox[0]:bbox[2]] = True
                masked = seg & region
                if not masked.any():
                    masked = region
                distance = max(float(depth_map[masked].mean()), _MIN_DISTANCE_M)
            except BackendError:
                missing.append(f"segmentation:{i}")
                distance = max(
                    float(depth_map[bbox[1]:bbox[3], bbox[0]:bbox[2]].mean()),
                    _MIN_DISTANCE_M)
        attrs = {}
        try:
            attrs = dict(backends.captioner.instance_record(
                crop(image, bbox), class_label))
        except BackendError:
            missing.append(f"instance_attributes:{i}")
        instances.append(InstanceRecord(
            instance_id=f"{image_id}:{i}",
            class_label=class_label,
            bbox=bbox,
            distance_m=distance,
            attributes=attrs,
        ))

    return SceneAnnotation(
        image_id=image_id,
        width=w,
        height=h,
        global_attrs=GlobalAttributes(**values),
        instances=tuple(instances),
        caption=caption,
        caption_paraphrases=paraphrases,
        missing_facets=tuple(missing),
    )


@dataclass(frozen=True)
class PairInstructions:
    """Compound-edit instructions for one pose-aligned pair."""

    forward_instruction: str
    backward_instruction: str
    forward_specs: tuple[EditSpec, ...]
    backward_specs: tuple[EditSpec, ...]
    changes: tuple[tuple[str, str, str], ...] = ()
    llm_fallback: bool = False


def _attribute_changes(source: SceneAnnotation, target: SceneAnnotation):
    changes = []
    src, tgt = source.global_attrs, target.global_attrs
    for cat in GLOBAL_EDIT_CATEGORIES:
        a, b = getattr(src, cat), getattr(tgt, cat)
        if a != b:
            changes.append((cat, a, b))
    return changes


def _insertion_specs(ann: SceneAnnotation,
                     rules: FilterRules) -> tuple[EditSpec, ...]:
    """Insert specs for the traffic that appears in one side of the pair;
    traffic lights become modify specs when their state is known. Static
    architecture (buildings) carries no spec."""
    specs = []
    for inst in filter_instances(ann.instances, ann.width, ann.height, rules):
        if inst.class_label == "building":
            continue
        if inst.class_label == "traffic light":
            color = inst.attributes.get("light_state")
            if not color:
                continue
            sentence = template_for("modify", inst.class_label).format(color=color)
            specs.append(EditSpec(
                action="modify", subject_class=inst.class_label,
                bbox=inst.bbox, distance_m=inst.distance_m,
                instruction_sentence=sentence, target_description=color))
            continue
        description = inst.attributes.get("description", inst.class_label)
        specs.append(EditSpec(
            action="insert", subject_class=inst.class_label,
            bbox=inst.bbox, distance_m=inst.distance_m,
            instruction_sentence=build_sentence("insert", inst.class_label,
                                                description),
            target_description=description))
    return tuple(specs)


def generate_pair_instructions(source_ann: SceneAnnotation,
                               target_ann: SceneAnnotation,
                               llm,
                               rules: FilterRules = DEFAULT_RULES) -> PairInstructions:
    """Build the compound-edit prompt pair: the global prompt opens with the
    remove-all-traffic sentence, the attribute-difference summary follows,
    and per-instance insertion specs carry the traffic of the opposite side."""
    changes = _attribute_changes(source_ann, target_ann)
    forward_changes = changes
    backward_changes = [(cat, b, a) for cat, a, b in changes]

    fallback = False
    try:
        forward_text = llm.instruction_from_diff(forward_changes)
        backward_text = llm.instruction_from_diff(backward_changes)
    except BackendError:
        from .banks import global_edit_sentence

        def templated(chs):
            if not chs:
                return "keep the overall scene appearance unchanged"
            return "; ".join(global_edit_sentence(c, to) for c, _f, to in chs)

        forward_text, backward_text = templated(forward_changes), templated(backward_changes)
        fallback = True

    prefix = REMOVE_ALL_TRAFFIC_SENTENCE
    return PairInstructions(
        forward_instruction=f"{prefix} {forward_text}",
        backward_instruction=f"{prefix} {backward_text}",
        forward_specs=_insertion_specs(target_ann, rules),
        backward_specs=_insertion_specs(source_ann, rules),
        changes=tuple(changes),
        llm_fallback=fallback,
    )


def dynamic_class(label: str) -> bool:
    return label in VEHICLE_CLASSES or label in ("person", "traffic cone")
