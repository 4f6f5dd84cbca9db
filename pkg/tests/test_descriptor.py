"""Scene annotation from pluggable perception backends, and pair prompts."""

import numpy as np
import pytest

from driveedit.backends import (
    BackendError,
    ConstantDepth,
    DescriptorBackends,
    EchoDiffLLM,
    FailingCaptioner,
    FailingLLM,
    MockCaptioner,
    RampDepth,
    StaticDetector,
    BoxSegmenter,
)
from driveedit.banks import REMOVE_ALL_TRAFFIC_SENTENCE
from driveedit.core.types import (
    GLOBAL_ATTRIBUTE_VALUES,
    GlobalAttributes,
    InstanceRecord,
    SceneAnnotation,
    annotation_to_dict,
)
from driveedit.descriptor import annotate, generate_pair_instructions, load_vlm_prompt


class LeftHalfSegmenter:
    """Marks the left half of the detection box, for closed-form depth means."""

    def segment(self, image, bbox):
        h, w = image.shape[:2]
        mask = np.zeros((h, w), dtype=bool)
        x0, y0, x1, y1 = bbox
        mask[y0:y1, x0:(x0 + x1) // 2] = True
        return mask


class FailingDetector:
    def detect(self, image):
        raise BackendError("detector offline")


class FailingDepth:
    def depth(self, image):
        raise BackendError("depth offline")


class FailingSegmenter:
    def segment(self, image, bbox):
        raise BackendError("segmenter offline")


def suite(detections, depth=None, segmenter=None, captioner=None,
          detector=None, threshold=0.3):
    return DescriptorBackends(
        detector=detector or StaticDetector(detections),
        segmenter=segmenter or BoxSegmenter(),
        depth=depth or ConstantDepth(12.0),
        captioner=captioner or MockCaptioner(seed=0),
        score_threshold=threshold,
    )


def scene_image(seed=0, size=32):
    rng = np.random.default_rng(seed)
    return rng.random((size, size, 3)).astype(np.float32)


# ---------------------------------------------------------------------------
# annotation assembly


def test_constant_depth_gives_exact_distance():
    img = scene_image()
    backends = suite([("car", (4, 4, 16, 16), 0.9)])
    ann = annotate(img, backends)
    assert len(ann.instances) == 1
    assert ann.instances[0].distance_m == 12.0
    assert ann.instances[0].class_label == "car"


def test_ramp_depth_left_half_mean_is_analytic():
    size = 32
    img = scene_image(size=size)
    bbox = (0, 8, size, 24)
    backends = suite([("car", bbox, 0.9)], depth=RampDepth(near=0.0, far=50.0),
                     segmenter=LeftHalfSegmenter())
    ann = annotate(img, backends)
    # depth column x carries 50*x/(size-1); masked columns are 0..size/2-1
    cols = 50.0 * np.arange(size // 2) / (size - 1)
    want = cols.mean()
    assert ann.instances[0].distance_m == pytest.approx(want, abs=1e-9)


def test_annotation_is_pure_in_image_bytes():
    img = scene_image(seed=3)
    backends = suite([("car", (4, 4, 16, 16), 0.9),
                      ("person", (20, 18, 28, 30), 0.8)])
    a = annotate(img, backends)
    b = annotate(img.copy(), backends)
    assert annotation_to_dict(a) == annotation_to_dict(b)


def test_distance_within_depth_range_over_bbox():
    img = scene_image(seed=6)
    bbox = (6, 6, 22, 20)

    class CapturingDepth:
        def __init__(self):
            self.last = None

        def depth(self, image):
            h, w = image.shape[:2]
            self.last = np.random.default_rng(9).uniform(1.0, 60.0, (h, w))
            return self.last

    depth = CapturingDepth()
    backends = suite([("bus", bbox, 0.9)], depth=depth)
    ann = annotate(img, backends)
    x0, y0, x1, y1 = bbox
    patch = depth.last[y0:y1, x0:x1]
    assert patch.min() <= ann.instances[0].distance_m <= patch.max()


def test_global_attributes_land_in_closed_sets():
    img = scene_image(seed=7)
    ann = annotate(img, suite([]))
    for facet, values in GLOBAL_ATTRIBUTE_VALUES.items():
        assert getattr(ann.global_attrs, facet) in values
    assert ann.caption
    assert len(ann.caption_paraphrases) == 3


def test_off_vocabulary_captioner_value_is_resolved():
    img = scene_image(seed=8)
    captioner = MockCaptioner(seed=0, off_vocab_fields=("weather",))
    ann = annotate(img, suite([], captioner=captioner))
    assert ann.global_attrs.weather in GLOBAL_ATTRIBUTE_VALUES["weather"]


def test_no_detections_yields_zero_instances():
    img = np.zeros((16, 16, 3), dtype=np.float32)
    ann = annotate(img, suite([]))
    assert ann.instances == ()


def test_empty_image_is_rejected():
    with pytest.raises(ValueError):
        annotate(np.zeros((0, 0, 3), dtype=np.float32), suite([]))


def test_score_threshold_filters_detections():
    img = scene_image(seed=9)
    backends = suite([("car", (4, 4, 10, 10), 0.29),
                      ("bus", (12, 12, 24, 24), 0.31)])
    ann = annotate(img, backends)
    assert [i.class_label for i in ann.instances] == ["bus"]


def test_out_of_frame_detection_is_clipped():
    img = scene_image(seed=10, size=16)
    backends = suite([("car", (-3, 2, 40, 12), 0.9)])
    ann = annotate(img, backends)
    assert ann.instances[0].bbox == (0, 2, 16, 12)


def test_failed_captioner_flags_missing_globals():
    img = scene_image(seed=11)
    ann = annotate(img, suite([], captioner=FailingCaptioner()))
    assert "global_attributes" in ann.missing_facets
    # fallback values still honor the closed vocabularies
    for facet, values in GLOBAL_ATTRIBUTE_VALUES.items():
        assert getattr(ann.global_attrs, facet) in values


def test_failed_detector_flags_missing_detections():
    img = scene_image(seed=12)
    ann = annotate(img, suite([], detector=FailingDetector()))
    assert "detections" in ann.missing_facets
    assert ann.instances == ()


def test_failed_depth_and_segmenter_are_survivable():
    img = scene_image(seed=13)
    ann = annotate(img, suite([("car", (4, 4, 12, 12), 0.9)],
                              depth=FailingDepth()))
    assert "depth" in ann.missing_facets
    assert len(ann.instances) == 1  # distance falls back but instance stays

    ann2 = annotate(img, suite([("car", (4, 4, 12, 12), 0.9)],
                               segmenter=FailingSegmenter()))
    assert any(f.startswith("segmentation") for f in ann2.missing_facets)


def test_vlm_prompt_lists_value_sets():
    prompt = load_vlm_prompt()
    for values in GLOBAL_ATTRIBUTE_VALUES.values():
        for v in values:
            assert v in prompt


# ---------------------------------------------------------------------------
# pose-pair instruction generation


def make_annotation(weather="Sunny", instances=(), image_id="img", size=64):
    return SceneAnnotation(
        image_id=image_id, width=size, height=size,
        global_attrs=GlobalAttributes(weather, "Day", "Summer", "urban"),
        instances=tuple(instances), caption="a street scene",
    )


def car_instance(iid="i0", bbox=(10, 10, 30, 30), distance=20.0,
                 description="red car"):
    return InstanceRecord(
        instance_id=iid, class_label="car", bbox=bbox, distance_m=distance,
        attributes={"color": description.split()[0], "description": description},
    )


def test_identical_annotations_yield_no_change_instruction():
    ann = make_annotation()
    out = generate_pair_instructions(ann, ann, EchoDiffLLM())
    assert out.changes == ()
    expected = (REMOVE_ALL_TRAFFIC_SENTENCE
                + " keep the overall scene appearance unchanged")
    assert out.forward_instruction == expected
    assert out.backward_instruction == expected
    assert not out.llm_fallback


def test_weather_difference_is_phrased_toward_target():
    src = make_annotation(weather="Sunny")
    tgt = make_annotation(weather="Rainy")
    out = generate_pair_instructions(src, tgt, EchoDiffLLM())
    assert out.changes == (("weather", "Sunny", "Rainy"),)
    assert "Rainy" in out.forward_instruction
    assert "Sunny" in out.backward_instruction
    assert "time of day" not in out.forward_instruction
    assert out.forward_instruction.startswith(REMOVE_ALL_TRAFFIC_SENTENCE)


def test_single_car_yields_single_insert_spec():
    src = make_annotation()
    tgt = make_annotation(instances=[car_instance(distance=20.0)])
    out = generate_pair_instructions(src, tgt, EchoDiffLLM())
    assert len(out.forward_specs) == 1
    spec = out.forward_specs[0]
    assert spec.action == "insert"
    assert spec.distance_m == 20.0
    assert spec.instruction_sentence == "insert a red car"
    assert out.backward_specs == ()


def test_buildings_are_not_reinserted():
    building = InstanceRecord("b0", "building", (0, 0, 40, 40), 30.0)
    tgt = make_annotation(instances=[building, car_instance(bbox=(45, 45, 60, 60))])
    out = generate_pair_instructions(make_annotation(), tgt, EchoDiffLLM())
    assert [s.subject_class for s in out.forward_specs] == ["car"]


def test_llm_failure_falls_back_to_templates():
    src = make_annotation(weather="Sunny")
    tgt = make_annotation(weather="Foggy")
    out = generate_pair_instructions(src, tgt, FailingLLM())
    assert out.llm_fallback
    assert "adjust the weather to Foggy" in out.forward_instruction
    assert "adjust the weather to Sunny" in out.backward_instruction
