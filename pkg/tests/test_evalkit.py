"""Evaluation protocol: pixel metrics, embedding similarity, crop variants."""

import numpy as np
import pytest

from driveedit.backends import HashEmbeddingProvider
from driveedit.core.types import EditSpec, TrainingSample
from driveedit.evalkit import (
    crop_metrics,
    embedding_similarity,
    evaluate_manifest,
    evaluate_records,
    mask_crop_box,
    pixel_metrics,
)
from driveedit.langmask import blank_mask, build_langmask

PROVIDER = HashEmbeddingProvider(dim=8, seed=0)


class DictEmbedder:
    """Image embeddings keyed by the image's corner value."""

    def __init__(self, table):
        self.table = table

    def image_embed(self, image):
        return np.asarray(self.table[float(image[0, 0, 0])])


def image(value, shape=(8, 8, 3)):
    return np.full(shape, value, dtype=np.float64)


# ---------------------------------------------------------------------------
# pixel metrics


def test_pixel_metrics_identical_images():
    a = np.random.default_rng(0).random((8, 8, 3))
    assert pixel_metrics(a, a.copy()) == (0.0, 0.0)


def test_pixel_metrics_constant_offset():
    # images are stored as float32, which bounds the 0.1 fixture at ~1e-7
    l1, l2 = pixel_metrics(image(0.3), image(0.4))
    assert l1 == pytest.approx(0.1, abs=1e-6)
    assert l2 == pytest.approx(0.01, abs=1e-6)
    # a dyadic offset is exact even in float32
    l1, l2 = pixel_metrics(image(0.25), image(0.375))
    assert (l1, l2) == (0.125, 0.015625)


def test_pixel_metrics_symmetric_and_shape_checked():
    rng = np.random.default_rng(1)
    a, b = rng.random((8, 8, 3)), rng.random((8, 8, 3))
    assert pixel_metrics(a, b) == pixel_metrics(b, a)
    with pytest.raises(ValueError):
        pixel_metrics(a, rng.random((8, 9, 3)))


# ---------------------------------------------------------------------------
# embedding similarity


def test_similarity_of_identical_embeddings():
    emb = DictEmbedder({0.3: [1.0, 2.0, -0.5], 0.7: [1.0, 2.0, -0.5]})
    got = embedding_similarity(image(0.3), image(0.7), emb)
    assert got == pytest.approx(1.0, abs=1e-12)


def test_similarity_orthogonal_and_opposite():
    emb = DictEmbedder({0.1: [1.0, 0.0], 0.2: [0.0, 1.0], 0.3: [-1.0, 0.0]})
    assert embedding_similarity(image(0.1), image(0.2), emb) == 0.0
    assert embedding_similarity(image(0.1), image(0.3), emb) == pytest.approx(
        -1.0, abs=1e-12)


def test_similarity_rejects_zero_norm():
    emb = DictEmbedder({0.1: [0.0, 0.0], 0.2: [1.0, 0.0]})
    with pytest.raises(ValueError):
        embedding_similarity(image(0.1), image(0.2), emb)


# ---------------------------------------------------------------------------
# mask crops


def spec_mask(bbox, h=20, w=20, sentence="change the car to blue"):
    spec = EditSpec("modify", "car", bbox, 8.0, sentence, "blue car")
    return build_langmask([spec], h, w, PROVIDER)


def test_crop_box_blank_mask_is_none():
    assert mask_crop_box(blank_mask(10, 10, 8)) is None


def test_crop_box_pads_and_clips():
    # interior box gets the 4px pad on every side
    assert mask_crop_box(spec_mask((6, 7, 10, 12))) == (2, 3, 14, 16)
    # a box at the origin clips at zero and at the image edge
    assert mask_crop_box(spec_mask((0, 0, 4, 4))) == (0, 0, 8, 8)
    assert mask_crop_box(spec_mask((15, 16, 20, 20))) == (11, 12, 20, 20)


def test_crop_metrics_none_for_blank_and_match_hand_slice():
    providers = {}
    out = np.random.default_rng(2).random((20, 20, 3))
    truth = np.random.default_rng(3).random((20, 20, 3))
    assert crop_metrics(out, truth, blank_mask(20, 20, 8), providers) is None
    mask = spec_mask((6, 7, 10, 12))
    got = crop_metrics(out, truth, mask, providers)
    want_l1, want_l2 = pixel_metrics(out[3:16, 2:14], truth[3:16, 2:14])
    assert got == {"l1": want_l1, "l2": want_l2}


def test_full_frame_mask_crop_equals_full_metrics():
    out = np.random.default_rng(4).random((20, 20, 3))
    truth = np.random.default_rng(5).random((20, 20, 3))
    mask = spec_mask((0, 0, 20, 20))
    got = crop_metrics(out, truth, mask, {})
    l1, l2 = pixel_metrics(out, truth)
    assert got == {"l1": l1, "l2": l2}


# ---------------------------------------------------------------------------
# aggregation


def make_record(pair_id, value_src, value_out, edit_type="global",
                bbox=None, size=12):
    src = np.full((size, size, 3), value_src, dtype=np.float32)
    tgt = np.full((size, size, 3), 0.5, dtype=np.float32)
    mask = spec_mask(bbox, size, size) if bbox else blank_mask(size, size, 8)
    sample = TrainingSample(
        pair_id=pair_id, source_image=src, target_image=tgt,
        forward_instruction="fwd", backward_instruction="bwd",
        forward_mask=mask, backward_mask=blank_mask(size, size, 8),
        edit_type=edit_type)
    return sample, np.full((size, size, 3), value_out, dtype=np.float32)


def test_single_record_aggregate_equals_per_sample_metrics():
    sample, out = make_record("a", 0.2, 0.6)
    table = evaluate_records([(sample, out)], {})
    l1, l2 = pixel_metrics(out, sample.target_image)
    assert table["global"]["count"] == 1
    assert table["global"]["full"] == {"l1": l1, "l2": l2}
    assert table["global"]["crop_count"] == 0
    assert table["global"]["crop"] == {}
    assert table["overall"] == table["global"]


def test_three_record_means_by_hand():
    records = [make_record("a", 0.2, 0.6), make_record("b", 0.1, 0.4),
               make_record("c", 0.9, 0.55)]
    table = evaluate_records(records, {})
    per = [pixel_metrics(out, s.target_image) for s, out in records]
    assert table["overall"]["count"] == 3
    assert table["overall"]["full"]["l1"] == pytest.approx(
        np.mean([p[0] for p in per]), abs=1e-12)
    assert table["overall"]["full"]["l2"] == pytest.approx(
        np.mean([p[1] for p in per]), abs=1e-12)


def test_aggregation_is_permutation_invariant():
    records = [make_record(f"p{i}", 0.1 * i, 0.05 * i) for i in range(1, 6)]
    forward = evaluate_records(records, {})
    backward = evaluate_records(records[::-1], {})
    assert forward.keys() == backward.keys()
    for name in forward:
        assert forward[name]["count"] == backward[name]["count"]
        for metric, value in forward[name]["full"].items():
            assert backward[name]["full"][metric] == pytest.approx(
                value, abs=1e-12)


def test_edit_types_bucket_separately_and_crops_only_where_masked():
    records = [
        make_record("g", 0.2, 0.6, edit_type="global"),
        make_record("l", 0.1, 0.4, edit_type="local", bbox=(2, 2, 7, 7)),
    ]
    table = evaluate_records(records, {})
    assert set(table) == {"global", "local", "overall"}
    assert table["global"]["crop_count"] == 0
    assert table["local"]["crop_count"] == 1
    assert table["overall"]["count"] == 2
    assert table["overall"]["crop_count"] == 1
    # constant images: the crop sees the same constant difference
    assert table["local"]["crop"]["l1"] == pytest.approx(
        table["local"]["full"]["l1"], abs=1e-12)


def test_similarity_columns_present_per_provider():
    sample, out = make_record("a", 0.25, 0.25)
    emb = DictEmbedder({0.25: [1.0, 0.0], 0.5: [1.0, 1.0]})
    table = evaluate_records([(sample, out)], {"probe": emb})
    assert "probe_sim" in table["overall"]["full"]
    want = embedding_similarity(out, sample.target_image, emb)
    assert table["overall"]["full"]["probe_sim"] == pytest.approx(
        want, abs=1e-12)


def test_manifest_evaluation_and_missing_output():
    s1, o1 = make_record("p-1", 0.2, 0.6)
    s2, o2 = make_record("p-2", 0.3, 0.1)
    table = evaluate_manifest([s1, s2], {"p-1": o1, "p-2": o2}, {})
    direct = evaluate_records([(s1, o1), (s2, o2)], {})
    assert table == direct
    with pytest.raises(KeyError):
        evaluate_manifest([s1, s2], {"p-1": o1}, {})
