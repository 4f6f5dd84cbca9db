"""Training objectives: arithmetic identities, gating, analytic gradients."""

import numpy as np
import pytest
import torch

from driveedit.core.types import LossWeights, TrainingSample
from driveedit.langmask import blank_mask
from driveedit.objectives import (
    loss_clip,
    loss_cycle,
    loss_identity,
    loss_sft,
    loss_total,
    lpips_distance,
    sample_cycle_instructions,
)
from driveedit.trainkit.generator import PoolPerceptual, ToyClipEmbedder, ToyGenerator


class ConstPhi:
    """Features independent of the image: the perceptual term vanishes."""

    def __init__(self):
        self.calls = 0

    def features(self, image):
        self.calls += 1
        return [np.zeros((2, 2))]


class MeanPhi:
    """Single feature map holding the image mean."""

    def features(self, image):
        return [np.full((2, 2), np.mean(image))]


class ShiftGenerator:
    """Adds a constant; counts invocations. Emits float64 so the scalar
    identities below hold at full precision."""

    def __init__(self, delta):
        self.delta = delta
        self.calls = 0

    def apply(self, image, instruction, mask):
        self.calls += 1
        return np.asarray(image, dtype=np.float64) + self.delta


class KeyedShiftGenerator:
    """Adds +delta under the forward text, -delta under the backward text."""

    def __init__(self, delta, forward_word="fwd"):
        self.delta = delta
        self.forward_word = forward_word
        self.calls = 0

    def apply(self, image, instruction, mask):
        self.calls += 1
        sign = 1.0 if self.forward_word in instruction else -1.0
        return np.asarray(image, dtype=np.float64) + sign * self.delta


class TableProvider:
    """Embeddings looked up from fixed tables; counts invocations."""

    def __init__(self, image_vec, table):
        self.image_vec = np.asarray(image_vec, dtype=np.float64)
        self.table = {k: np.asarray(v, dtype=np.float64)
                      for k, v in table.items()}
        self.calls = 0

    def image_embed(self, image):
        self.calls += 1
        return self.image_vec

    def text_embed(self, text):
        self.calls += 1
        return self.table[text]


def images(seed=0, shape=(6, 6, 3)):
    rng = np.random.default_rng(seed)
    return rng.random(shape), rng.random(shape)


def make_sample(seed=0, edit_type="global", paraphrases=False):
    rng = np.random.default_rng(seed)
    src = rng.random((6, 6, 3)).astype(np.float32)
    tgt = rng.random((6, 6, 3)).astype(np.float32)
    return TrainingSample(
        pair_id="p", source_image=src, target_image=tgt,
        forward_instruction="fwd text", backward_instruction="bwd text",
        forward_mask=blank_mask(6, 6, 4), backward_mask=blank_mask(6, 6, 4),
        edit_type=edit_type,
        forward_paraphrases=("fwd text", "fwd alt") if paraphrases else (),
        backward_paraphrases=("bwd text", "bwd alt") if paraphrases else (),
    )


# ---------------------------------------------------------------------------
# supervised reconstruction


def test_sft_zero_for_perfect_reconstruction():
    x, _ = images()
    assert float(loss_sft(x, x.copy(), ConstPhi())) == 0.0


def test_sft_constant_offset_hand_value():
    x, _ = images()
    x_hat = x + 0.1
    got = float(loss_sft(x, x_hat, ConstPhi()))
    assert got == pytest.approx(0.3, abs=1e-9)


def test_sft_perceptual_term_hand_value():
    x, _ = images()
    x_hat = x + 0.1
    # feature = image mean, so the layer difference is 0.1 -> squared 0.01
    got = float(loss_sft(x, x_hat, MeanPhi()))
    assert got == pytest.approx(3.0 * 0.1 + 0.5 * 0.01, abs=1e-9)


def test_sft_scales_linearly_with_weights():
    x, y = images(3)
    base = LossWeights()
    doubled = LossWeights(sft=6.0, sft_lpips=1.0)
    a = float(loss_sft(x, y, MeanPhi(), base))
    b = float(loss_sft(x, y, MeanPhi(), doubled))
    assert b == pytest.approx(2.0 * a, rel=1e-12)


def test_lpips_distance_layer_mismatch_raises():
    class FlakyPhi:
        """Returns one layer on the first call, two on the next."""

        def __init__(self):
            self.calls = 0

        def features(self, image):
            self.calls += 1
            return [np.zeros((2, 2))] * self.calls

    with pytest.raises(ValueError):
        lpips_distance(np.zeros((4, 4, 3)), np.zeros((4, 4, 3)), FlakyPhi())


# ---------------------------------------------------------------------------
# identity preservation


def test_identity_zero_for_identity_generator():
    x, _ = images(1)
    w = LossWeights()
    got = loss_identity(x, ShiftGenerator(0.0), "same", ConstPhi(), w,
                        blank_mask(6, 6, 4))
    assert float(got) == 0.0


def test_identity_hand_value_for_shift_generator():
    x, _ = images(2)
    got = loss_identity(x, ShiftGenerator(0.2), "same", ConstPhi(),
                        LossWeights(), blank_mask(6, 6, 4))
    assert float(got) == pytest.approx(0.05 * 0.2, abs=1e-9)


def test_identity_requires_blank_mask():
    from driveedit.core.types import EditSpec
    from driveedit.langmask import build_langmask
    from driveedit.backends import HashEmbeddingProvider

    spec = EditSpec("modify", "car", (1, 1, 3, 3), 5.0,
                    "change the car to red", "red car")
    mask = build_langmask([spec], 6, 6, HashEmbeddingProvider(dim=4, seed=0))
    x, _ = images(3)
    with pytest.raises(ValueError):
        loss_identity(x, ShiftGenerator(0.0), "same", ConstPhi(),
                      LossWeights(), mask)


# ---------------------------------------------------------------------------
# cycle consistency


def test_cycle_zero_when_edits_invert():
    x, _ = images(4)
    gen = KeyedShiftGenerator(0.1)
    m = blank_mask(6, 6, 4)
    got = loss_cycle(x, gen, "fwd text", "bwd text", m, m, ConstPhi(),
                     LossWeights())
    assert float(got) < 1e-12
    assert gen.calls == 2


def test_cycle_hand_value_when_edits_compound():
    x, _ = images(5)
    gen = ShiftGenerator(0.1)  # adds 0.1 in both directions
    m = blank_mask(6, 6, 4)
    got = loss_cycle(x, gen, "fwd text", "bwd text", m, m, ConstPhi(),
                     LossWeights())
    assert float(got) == pytest.approx(0.05 * 0.2, abs=1e-9)


def test_cycle_instructions_local_pairs_reuse_forward_text():
    from driveedit.core.types import EditSpec
    from driveedit.langmask import build_langmask
    from driveedit.backends import HashEmbeddingProvider

    provider = HashEmbeddingProvider(dim=4, seed=0)
    fwd_spec = EditSpec("insert", "car", (1, 1, 3, 3), 5.0,
                        "insert a red car", "red car")
    bwd_spec = EditSpec("delete", "car", (1, 1, 3, 3), 5.0,
                        "remove the red car", None)
    rng = np.random.default_rng(0)
    src = rng.random((6, 6, 3)).astype(np.float32)
    tgt = rng.random((6, 6, 3)).astype(np.float32)
    sample = TrainingSample(
        pair_id="p", source_image=src, target_image=tgt,
        forward_instruction="insert a red car",
        backward_instruction="remove the red car",
        forward_mask=build_langmask([fwd_spec], 6, 6, provider),
        backward_mask=build_langmask([bwd_spec], 6, 6, provider),
        edit_type="local",
    )
    t_t, t_s, m_t, m_s = sample_cycle_instructions(sample)
    assert t_t == t_s == "insert a red car"
    assert m_t is sample.forward_mask
    assert m_s is sample.backward_mask


def test_cycle_instructions_draw_from_paraphrases():
    sample = make_sample(paraphrases=True)
    seen_fwd = set()
    for seed in range(30):
        t_t, t_s, _, _ = sample_cycle_instructions(
            sample, np.random.default_rng(seed))
        seen_fwd.add(t_t)
        assert t_t in sample.forward_paraphrases
        assert t_s in sample.backward_paraphrases
    assert seen_fwd == {"fwd text", "fwd alt"}
    # without an rng the first paraphrase is used
    t_t, t_s, _, _ = sample_cycle_instructions(sample)
    assert (t_t, t_s) == ("fwd text", "bwd text")


# ---------------------------------------------------------------------------
# text alignment


def test_clip_zero_when_aligned_with_target():
    provider = TableProvider([1.0, 0.0], {"tgt": [1.0, 0.0], "src": [0.0, 1.0]})
    got = loss_clip(np.zeros((4, 4, 3)), "tgt", "src", provider, LossWeights())
    assert float(got) == 0.0


def test_clip_hand_value_maximal_misalignment():
    # orthogonal to the target, identical to the source
    provider = TableProvider([0.0, 1.0], {"tgt": [1.0, 0.0], "src": [0.0, 1.0]})
    got = loss_clip(np.zeros((4, 4, 3)), "tgt", "src", provider, LossWeights())
    assert float(got) == pytest.approx(6.0, abs=1e-12)


def test_clip_intermediate_value():
    provider = TableProvider([0.6, 0.8], {"tgt": [1.0, 0.0], "src": [0.0, 1.0]})
    got = loss_clip(np.zeros((4, 4, 3)), "tgt", "src", provider, LossWeights())
    assert float(got) == pytest.approx(3.0 * (1 - 0.6) + 3.0 * 0.8, abs=1e-12)


def test_clip_invariant_under_joint_rotation():
    rng = np.random.default_rng(6)
    img_vec = rng.standard_normal(8)
    tgt_vec = rng.standard_normal(8)
    src_vec = rng.standard_normal(8)
    q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
    base = loss_clip(np.zeros((4, 4, 3)), "t", "s",
                     TableProvider(img_vec, {"t": tgt_vec, "s": src_vec}),
                     LossWeights())
    rotated = loss_clip(np.zeros((4, 4, 3)), "t", "s",
                        TableProvider(q @ img_vec,
                                      {"t": q @ tgt_vec, "s": q @ src_vec}),
                        LossWeights())
    assert float(rotated) == pytest.approx(float(base), abs=1e-9)


def test_clip_rejects_zero_norm_and_dim_mismatch():
    zero = TableProvider([0.0, 0.0], {"t": [1.0, 0.0], "s": [0.0, 1.0]})
    with pytest.raises(ValueError):
        loss_clip(np.zeros((4, 4, 3)), "t", "s", zero, LossWeights())
    short = TableProvider([1.0, 0.0], {"t": [1.0, 0.0, 0.0], "s": [0.0, 1.0]})
    with pytest.raises(ValueError):
        loss_clip(np.zeros((4, 4, 3)), "t", "s", short, LossWeights())


# ---------------------------------------------------------------------------
# combined loss


def test_total_matches_sum_of_terms():
    sample = make_sample(seed=7)
    gen = ShiftGenerator(0.05)
    phi = MeanPhi()
    provider = TableProvider([0.6, 0.8],
                             {"fwd text": [1.0, 0.0], "bwd text": [0.0, 1.0]})
    w = LossWeights()
    total, breakdown = loss_total(sample, gen, phi, provider, w)
    assert set(breakdown) == {"sft", "id", "cycle", "clip"}
    assert float(total) == pytest.approx(sum(breakdown.values()), abs=1e-9)

    x_hat = sample.source_image.astype(np.float64) + 0.05
    want_sft = float(loss_sft(sample.target_image, x_hat, phi, w))
    assert breakdown["sft"] == pytest.approx(want_sft, abs=1e-12)
    want_clip = float(loss_clip(x_hat, "fwd text", "bwd text", provider, w))
    assert breakdown["clip"] == pytest.approx(want_clip, abs=1e-12)
    # feature map is the image mean, so a shift of d adds w_lpips * d^2;
    # float32 storage of the sample images limits agreement to ~1e-9
    assert breakdown["id"] == pytest.approx(
        0.05 * 0.05 + 0.05 * 0.05 ** 2, abs=1e-9)
    assert breakdown["cycle"] == pytest.approx(
        0.05 * 0.1 + 0.05 * 0.1 ** 2, abs=1e-9)


def test_total_shares_forward_pass_and_gates_terms():
    sample = make_sample(seed=8)
    provider = TableProvider([1.0, 0.0],
                             {"fwd text": [1.0, 0.0], "bwd text": [0.0, 1.0]})

    # sft + clip share one generator call
    gen = ShiftGenerator(0.05)
    loss_total(sample, gen, ConstPhi(), provider,
               LossWeights(id=0.0, id_lpips=0.0, cycle=0.0, cycle_lpips=0.0))
    assert gen.calls == 1

    # identity adds one call, cycle adds two
    gen = ShiftGenerator(0.05)
    loss_total(sample, gen, ConstPhi(), provider, LossWeights())
    assert gen.calls == 4

    # disabling a term skips its generator work entirely
    gen = ShiftGenerator(0.05)
    loss_total(sample, gen, ConstPhi(), provider,
               LossWeights(cycle=0.0, cycle_lpips=0.0))
    assert gen.calls == 2


def test_total_all_zero_weights_is_zero_with_no_backend_calls():
    sample = make_sample(seed=9)
    gen = ShiftGenerator(0.05)
    phi = ConstPhi()
    provider = TableProvider([1.0, 0.0],
                             {"fwd text": [1.0, 0.0], "bwd text": [0.0, 1.0]})
    zero = LossWeights(sft=0.0, sft_lpips=0.0, id=0.0, id_lpips=0.0,
                       cycle=0.0, cycle_lpips=0.0, clip=0.0)
    total, breakdown = loss_total(sample, gen, phi, provider, zero)
    assert float(total) == 0.0
    assert breakdown == {"sft": 0.0, "id": 0.0, "cycle": 0.0, "clip": 0.0}
    assert gen.calls == 0
    assert phi.calls == 0
    assert provider.calls == 0


def test_total_nonnegative_on_random_fixtures():
    for seed in range(5):
        sample = make_sample(seed=seed)
        provider = TableProvider([0.3, 0.7],
                                 {"fwd text": [1.0, 0.0],
                                  "bwd text": [0.0, 1.0]})
        total, breakdown = loss_total(sample, ShiftGenerator(0.02), MeanPhi(),
                                      provider, LossWeights())
        for key in ("sft", "id", "cycle"):
            assert breakdown[key] >= 0.0
        assert float(total) >= 0.0


# ---------------------------------------------------------------------------
# analytic gradients vs central finite differences


def fd_setup():
    torch.manual_seed(0)
    gen = ToyGenerator(text_dim=6, mask_dim=4, hidden=6, seed=5,
                       dtype=torch.float64)
    rng = np.random.default_rng(11)
    x_s = torch.from_numpy(rng.random((8, 8, 3)))
    x_t = torch.from_numpy(rng.random((8, 8, 3)))
    mask = blank_mask(8, 8, 4)
    return gen, x_s, x_t, mask


def fd_gradcheck(gen, loss_fn, probes=8, eps=1e-6, tol=1e-4, seed=0):
    """Central finite differences on a random subset of parameters."""
    gen.zero_grad()
    loss = loss_fn()
    loss.backward()
    grads = {name: p.grad.detach().clone()
             for name, p in gen.named_parameters()}
    rng = np.random.default_rng(seed)
    params = dict(gen.named_parameters())
    names = sorted(params)
    checked = 0
    for _ in range(probes):
        name = names[int(rng.integers(len(names)))]
        p = params[name]
        flat_idx = int(rng.integers(p.numel()))
        idx = np.unravel_index(flat_idx, p.shape)
        with torch.no_grad():
            p[idx] += eps
            up = float(loss_fn())
            p[idx] -= 2 * eps
            down = float(loss_fn())
            p[idx] += eps
        numeric = (up - down) / (2 * eps)
        analytic = float(grads[name][idx])
        err = abs(numeric - analytic) / max(abs(numeric), abs(analytic), 1e-8)
        assert err <= tol, (name, idx, analytic, numeric, err)
        checked += 1
    gen.zero_grad()
    return checked


def test_gradients_match_finite_differences():
    gen, x_s, x_t, mask = fd_setup()
    phi = PoolPerceptual()
    clip = ToyClipEmbedder(dim=6, seed=1)
    w = LossWeights()

    terms = {
        "sft": lambda: loss_sft(x_t, gen.apply(x_s, "make it rain", mask),
                                phi, w),
        "id": lambda: loss_identity(x_s, gen, "keep everything", phi, w, mask),
        "cycle": lambda: loss_cycle(x_s, gen, "make it rain", "make it sunny",
                                    mask, mask, phi, w),
        "clip": lambda: loss_clip(gen.apply(x_s, "make it rain", mask),
                                  "make it rain", "make it sunny", clip, w),
    }
    for name, fn in terms.items():
        checked = fd_gradcheck(gen, fn, probes=8, seed=hash(name) % 1000)
        assert checked == 8
