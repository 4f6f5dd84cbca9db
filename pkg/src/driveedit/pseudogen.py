"""Pseudo-pair generation from unpaired driving images.

Two routes produce (source, target, instruction, mask) training samples
without any aligned ground truth:

* global pairs: re-render the whole frame under a resampled scene
  attribute, keep the real image as the target;
* local pairs: crop one instance, super-resolve, edit, downsize, and
  blend the edited patch back into the frame with a Poisson solve so the
  seam carries no gradient artifacts.

Backends (editor, super-resolution, segmenter, verifier, embeddings) are
pluggable stand-ins with mock defaults; the pipeline shape is fixed here.
"""
from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from .banks import (
    GLOBAL_EDIT_CATEGORIES,
    AttributeBanks,
    DEFAULT_BANKS,
    global_edit_sentence,
    load_templates,
    subject_kind,
)
from .core.images import as_float_image, crop, resize_image
from .core.types import (
    ACTIONS,
    VEHICLE_CLASSES,
    EditSpec,
    InstanceRecord,
    SceneAnnotation,
    TrainingSample,
    instance_from_dict,
    instance_to_dict,
)
from .langmask import blank_mask, build_langmask
from .poisson import BlendRegionError, blend_residual, poisson_blend

# Classes whose instances can anchor a local edit. Static scenery
# (buildings, cones) is left untouched.
EDITABLE_CLASSES = frozenset(VEHICLE_CLASSES | {"person", "traffic light"})

_REGION_DILATION_PX = 2


def rng_for(seed: int, image_id: str) -> np.random.Generator:
    """Per-image generator, independent of worker scheduling order."""
    digest = hashlib.sha256(f"{seed}|{image_id}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _choice(rng: np.random.Generator, values) -> str:
    return values[int(rng.integers(len(values)))]


@dataclass(frozen=True)
class LocalEditProvenance:
    """Everything quality control needs to re-judge a local pseudo-pair."""

    instance: InstanceRecord
    action: str
    prompt: str
    target_value: str | None
    pseudo_is_target: bool
    region_mask: np.ndarray
    residual: float
    original_crop: np.ndarray
    edited_crop: np.ndarray

    def __post_init__(self):
        region = np.ascontiguousarray(self.region_mask, dtype=bool)
        region.setflags(write=False)
        object.__setattr__(self, "region_mask", region)


@dataclass(frozen=True)
class PairOutcome:
    """A generated sample, or the reason one was dropped."""

    sample: TrainingSample | None
    reason: str | None = None
    provenance: LocalEditProvenance | None = None

    @property
    def accepted(self) -> bool:
        return self.sample is not None


def sample_global_edit(ann: SceneAnnotation, rng: np.random.Generator,
                       banks: AttributeBanks = DEFAULT_BANKS,
                       ) -> tuple[str, str, str, str]:
    """Pick a scene attribute and a new value it does not currently hold.

    Returns (category, from_value, to_value, instruction), where the
    instruction phrases the edit toward ``to_value``.
    """
    category = _choice(rng, GLOBAL_EDIT_CATEGORIES)
    from_value = getattr(ann.global_attrs, category)
    pool = [v for v in banks.global_bank(category) if v != from_value]
    if not pool:
        raise ValueError(f"attribute bank for {category!r} has a single value")
    to_value = _choice(rng, pool)
    return category, from_value, to_value, global_edit_sentence(category, to_value)


def make_global_pair(image: np.ndarray, ann: SceneAnnotation, backend,
                     verifier, rng: np.random.Generator,
                     banks: AttributeBanks = DEFAULT_BANKS,
                     mask_dim: int = 64) -> PairOutcome:
    """Whole-frame attribute pair: the re-rendered frame conditions the
    model, the untouched real frame is the ground truth."""
    img = as_float_image(image)
    category, from_value, to_value, edit_instruction = sample_global_edit(
        ann, rng, banks)
    edited = as_float_image(backend.edit(img, edit_instruction, None))
    if edited.shape != img.shape:
        raise ValueError(
            f"editing backend changed dims {img.shape} -> {edited.shape}")
    if not verifier.same_scene(img, edited):
        return PairOutcome(None, reason="verifier: not the same scene")
    if not verifier.change_applied(img, edited, edit_instruction):
        return PairOutcome(None, reason="verifier: edit not applied")
    h, w = img.shape[:2]
    sample = TrainingSample(
        pair_id=f"{ann.image_id}:global:{category}",
        source_image=edited,
        target_image=img,
        forward_instruction=global_edit_sentence(category, from_value),
        backward_instruction=global_edit_sentence(category, to_value),
        forward_mask=blank_mask(h, w, mask_dim),
        backward_mask=blank_mask(h, w, mask_dim),
        edit_type="global",
    )
    return PairOutcome(sample)


def _instance_subject(inst: InstanceRecord) -> str:
    return inst.attributes.get("description") or inst.class_label


def _sample_edit_text(inst: InstanceRecord, action: str,
                      rng: np.random.Generator, banks: AttributeBanks,
                      templates: dict) -> tuple[str, str, str]:
    """Phrase the edit applied to the cropped instance.

    Returns (prompt, source_description, target_description): the prompt
    drives the editing backend, the two descriptions phrase either
    direction of the pair afterwards.
    """
    kind = subject_kind(inst.class_label)
    subject = _instance_subject(inst)
    group = templates[action]
    if kind == "traffic_light":
        color = _choice(rng, banks.traffic_light_colors)
        prompt = group["traffic_light"].format(color=color)
        source = inst.attributes.get("light_state", "traffic light")
        if source != "traffic light":
            source = f"{source} traffic light"
        return prompt, source, f"{color} traffic light"
    if kind == "vehicle":
        color = _choice(rng, banks.vehicle_colors)
        if action == "insert":
            obj = _choice(rng, banks.vehicle_objects)
            return group["vehicle"].format(color=color, object=obj), subject, \
                f"{color} {obj}"
        if action == "modify":
            return group["vehicle"].format(subject=subject, color=color), \
                subject, f"{color} {inst.class_label}"
        if action == "replace":
            obj = _choice(rng, banks.vehicle_objects)
            return group["vehicle"].format(subject=subject, color=color,
                                           object=obj), subject, f"{color} {obj}"
        return group["generic"].format(subject=subject), subject, subject
    if kind == "pedestrian":
        age = _choice(rng, banks.pedestrian_ages)
        adjective = _choice(rng, banks.pedestrian_adjectives)
        article = _choice(rng, banks.pedestrian_articles)
        described = f"{age} person in a {adjective} {article}"
        if action == "insert":
            return group["pedestrian"].format(age=age, adjective=adjective,
                                              article=article), subject, described
        if action == "modify":
            return group["pedestrian"].format(subject=subject,
                                              adjective=adjective,
                                              article=article), subject, \
                f"person in a {adjective} {article}"
        if action == "replace":
            return group["pedestrian"].format(subject=subject, age=age,
                                              adjective=adjective,
                                              article=article), subject, described
        return group["generic"].format(subject=subject), subject, subject
    # generic fall-through for any other editable class
    if action == "delete":
        return group["generic"].format(subject=subject), subject, subject
    if action == "insert":
        return group["generic"].format(target=subject), subject, subject
    return group["generic"].format(subject=subject, target=subject), \
        subject, subject


def _spec_for(action: str, inst: InstanceRecord, description: str,
              templates: dict) -> EditSpec:
    """EditSpec whose sentence phrases ``action`` on ``description``."""
    group = templates[action]["generic"]
    if action == "delete":
        sentence = group.format(subject=description)
        target = None
    elif action == "insert":
        sentence = group.format(target=description)
        target = description
    else:
        raise ValueError(f"_spec_for handles insert/delete, got {action!r}")
    return EditSpec(action=action, subject_class=inst.class_label,
                    bbox=inst.bbox, distance_m=inst.distance_m,
                    instruction_sentence=sentence, target_description=target)


def _swap_spec(action: str, inst: InstanceRecord, from_desc: str,
               to_desc: str, templates: dict) -> EditSpec:
    """modify/replace EditSpec phrasing ``from_desc`` -> ``to_desc``."""
    sentence = templates[action]["generic"].format(subject=from_desc,
                                                   target=to_desc)
    return EditSpec(action=action, subject_class=inst.class_label,
                    bbox=inst.bbox, distance_m=inst.distance_m,
                    instruction_sentence=sentence, target_description=to_desc)


def blend_region(segmask: np.ndarray, bbox, height: int, width: int,
                 dilation_px: int = _REGION_DILATION_PX) -> np.ndarray:
    """Edited-pixel footprint: the instance mask grown a little, kept
    inside the box and off the image border so the blend boundary exists."""
    region = np.asarray(segmask, dtype=bool)
    if dilation_px > 0:
        region = binary_dilation(region, iterations=dilation_px)
    allowed = np.zeros((height, width), dtype=bool)
    x0, y0, x1, y1 = bbox
    allowed[max(y0, 1):min(y1, height - 1), max(x0, 1):min(x1, width - 1)] = True
    return region & allowed


def make_local_pair(image: np.ndarray, ann: SceneAnnotation,
                    banks: AttributeBanks, backends: dict,
                    rng: np.random.Generator,
                    templates: dict | None = None) -> PairOutcome:
    """Instance-level pseudo-pair via crop, super-resolve, edit, blend.

    The blended frame normally conditions the model (the instruction then
    asks for the real frame); applied deletions flip roles with
    probability 0.5 so the corpus contains true delete targets rather
    than only inserts.
    """
    templates = templates or load_templates()
    img = as_float_image(image)
    h, w = img.shape[:2]
    editable = [i for i in ann.instances if i.class_label in EDITABLE_CLASSES]
    if not editable:
        raise ValueError("annotation has no editable instance")
    inst = editable[int(rng.integers(len(editable)))]
    if inst.class_label == "traffic light":
        action = "modify"
    else:
        action = _choice(rng, ACTIONS)
    prompt, source_desc, target_desc = _sample_edit_text(
        inst, action, rng, banks, templates)

    # crop -> super-resolve -> edit -> resize back -> paste -> blend
    x0, y0, x1, y1 = inst.bbox
    original_crop = crop(img, inst.bbox)
    upscaled = backends["sr"].upscale(original_crop)
    edited_big = as_float_image(backends["generator"].edit(upscaled, prompt, None))
    if edited_big.shape != upscaled.shape:
        raise ValueError("editing backend changed crop dims")
    edited_crop = resize_image(edited_big, y1 - y0, x1 - x0)
    pasted = img.copy()
    pasted[y0:y1, x0:x1] = edited_crop
    segmask = backends["segmenter"].segment(img, inst.bbox)
    region = blend_region(segmask, inst.bbox, h, w)
    if not region.any():
        return PairOutcome(None, reason="blend region empty after clipping")
    try:
        pseudo = poisson_blend(img, pasted, region)
    except BlendRegionError as exc:
        return PairOutcome(None, reason=f"blend rejected: {exc}")
    # residual is a property of the solve; clamp to the image range after
    residual = blend_residual(pseudo, pasted, region)
    pseudo = np.clip(pseudo, 0.0, 1.0)
    pseudo[~region] = img[~region]

    provider = backends["embedding"]
    pseudo_is_target = False
    if action == "delete":
        # the blended frame lacks the subject; with p=0.5 treat it as the
        # ground truth so deletions survive role inversion
        pseudo_is_target = bool(rng.random() < 0.5)
    if action == "insert":
        fwd = _spec_for("delete", inst, target_desc, templates)
        bwd = _spec_for("insert", inst, target_desc, templates)
    elif action == "delete":
        if pseudo_is_target:
            fwd = _spec_for("delete", inst, source_desc, templates)
            bwd = _spec_for("insert", inst, source_desc, templates)
        else:
            fwd = _spec_for("insert", inst, source_desc, templates)
            bwd = _spec_for("delete", inst, source_desc, templates)
    else:  # modify / replace invert by swapping the two descriptions
        fwd = _swap_spec(action, inst, target_desc, source_desc, templates)
        bwd = _swap_spec(action, inst, source_desc, target_desc, templates)

    if pseudo_is_target:
        source_image, target_image = img, pseudo
    else:
        source_image, target_image = pseudo, img
    sample = TrainingSample(
        pair_id=f"{ann.image_id}:local:{inst.instance_id}:{action}",
        source_image=source_image,
        target_image=target_image,
        forward_instruction=fwd.instruction_sentence,
        backward_instruction=bwd.instruction_sentence,
        forward_mask=build_langmask([fwd], h, w, provider),
        backward_mask=build_langmask([bwd], h, w, provider),
        edit_type="local",
    )
    provenance = LocalEditProvenance(
        instance=inst, action=action, prompt=prompt, target_value=target_desc,
        pseudo_is_target=pseudo_is_target, region_mask=region,
        residual=residual, original_crop=original_crop,
        edited_crop=crop(pseudo, inst.bbox))
    return PairOutcome(sample, provenance=provenance)


def save_provenance(prov: LocalEditProvenance, directory: str) -> None:
    """Persist quality-control inputs next to a stored sample."""
    os.makedirs(directory, exist_ok=True)
    np.save(os.path.join(directory, "region.npy"),
            prov.region_mask.astype(np.uint8))
    np.save(os.path.join(directory, "crop_before.npy"), prov.original_crop)
    np.save(os.path.join(directory, "crop_after.npy"), prov.edited_crop)
    record = {
        "instance": instance_to_dict(prov.instance),
        "action": prov.action,
        "prompt": prov.prompt,
        "target_value": prov.target_value,
        "pseudo_is_target": prov.pseudo_is_target,
        "residual": prov.residual,
    }
    with open(os.path.join(directory, "provenance.json"), "w",
              encoding="utf-8") as f:
        json.dump(record, f, ensure_ascii=False, indent=2)


def load_provenance(directory: str) -> LocalEditProvenance:
    with open(os.path.join(directory, "provenance.json"), encoding="utf-8") as f:
        record = json.load(f)
    return LocalEditProvenance(
        instance=instance_from_dict(record["instance"]),
        action=record["action"],
        prompt=record["prompt"],
        target_value=record["target_value"],
        pseudo_is_target=bool(record["pseudo_is_target"]),
        region_mask=np.load(os.path.join(directory, "region.npy")).astype(bool),
        residual=float(record["residual"]),
        original_crop=np.load(os.path.join(directory, "crop_before.npy")),
        edited_crop=np.load(os.path.join(directory, "crop_after.npy")),
    )
