"""Training objectives for instruction-guided image editing.

Four terms: supervised reconstruction, identity preservation under a
blank mask, cycle reversibility, and an embedding alignment penalty.
Distances reduce by mean over elements so the weights are resolution
independent; the perceptual term is the mean squared distance of
channel-normalized feature maps summed across layers.

Everything here is written against scalar/array operators only (``-``,
``abs``, ``**``, ``.mean()``, ``.sum()``), so the same code runs on
numpy arrays for closed-form checks and on autograd tensors during
training without modification.
"""
from __future__ import annotations

from typing import Protocol

import numpy as np

from .core.types import LangMask, LossWeights, TrainingSample
from .langmask import blank_mask


class GeneratorContract(Protocol):
    """Conditional editor: (image, instruction, mask) -> image, same dims."""

    def apply(self, image, instruction: str, mask: LangMask): ...


class PerceptualExtractor(Protocol):
    def features(self, image) -> list: ...


def _align(a, b):
    """Coerce a plain numpy operand into the other operand's framework.

    Autograd frameworks refuse arithmetic against raw ndarrays; the
    constant side is copied over (``new_tensor``) while the side that
    may carry gradients is left untouched.
    """
    if isinstance(a, np.ndarray) and hasattr(b, "new_tensor"):
        return b.new_tensor(a), b
    if isinstance(b, np.ndarray) and hasattr(a, "new_tensor"):
        return a, a.new_tensor(b)
    return a, b


def _l1(a, b):
    a, b = _align(a, b)
    return abs(a - b).mean()


def _mean_sq(a, b):
    a, b = _align(a, b)
    return ((a - b) ** 2).mean()


def _check_dims(a, b):
    if tuple(a.shape) != tuple(b.shape):
        raise ValueError(f"image shapes differ: {tuple(a.shape)} vs {tuple(b.shape)}")


def lpips_distance(a, b, phi: PerceptualExtractor):
    """Per-layer mean squared feature distance, summed over layers."""
    fa, fb = phi.features(a), phi.features(b)
    if len(fa) != len(fb):
        raise ValueError("feature extractors returned differing layer counts")
    total = None
    for la, lb in zip(fa, fb):
        term = _mean_sq(la, lb)
        total = term if total is None else total + term
    return 0.0 if total is None else total


def _recon_penalty(x, x_hat, phi, weight: float, weight_lpips: float):
    _check_dims(x, x_hat)
    loss = 0.0
    if weight:
        loss = loss + weight * _l1(x, x_hat)
    if weight_lpips:
        loss = loss + weight_lpips * lpips_distance(x, x_hat, phi)
    return loss


def loss_sft(x_t, x_hat_t, phi: PerceptualExtractor,
             w: LossWeights = LossWeights()):
    """Supervised term: pixel L1 plus perceptual distance to the target."""
    return _recon_penalty(x_t, x_hat_t, phi, w.sft, w.sft_lpips)


def loss_identity(x_s, f: GeneratorContract, t_s: str,
                  phi: PerceptualExtractor, w: LossWeights,
                  mask: LangMask):
    """The generator must reproduce its input under a blank mask."""
    if not mask.is_blank:
        raise ValueError("identity loss requires a blank mask")
    x_hat = f.apply(x_s, t_s, mask)
    return _recon_penalty(x_s, x_hat, phi, w.id, w.id_lpips)


def loss_cycle(x_s, f: GeneratorContract, t_t: str, t_s: str,
               M_t: LangMask, M_s: LangMask, phi: PerceptualExtractor,
               w: LossWeights):
    """Edit forward then backward; penalize drift from the start image."""
    x_mid = f.apply(x_s, t_t, M_t)
    x_back = f.apply(x_mid, t_s, M_s)
    return _recon_penalty(x_s, x_back, phi, w.cycle, w.cycle_lpips)


def _cosine(a, b):
    if len(a) != len(b):
        raise ValueError(f"embedding dims differ: {len(a)} vs {len(b)}")
    a, b = _align(a, b)
    sq_a, sq_b = (a * a).sum(), (b * b).sum()
    if _scalar(sq_a) == 0.0 or _scalar(sq_b) == 0.0:
        raise ValueError("zero-norm embedding")
    return (a * b).sum() / (sq_a ** 0.5 * sq_b ** 0.5)


def loss_clip(x_hat, t_target: str, t_source: str, provider,
              w: LossWeights):
    """Pull the output toward the target text, push it off the source text."""
    e_img = provider.image_embed(x_hat)
    e_tgt = provider.text_embed(t_target)
    e_src = provider.text_embed(t_source)
    return w.clip * (1.0 - _cosine(e_img, e_tgt)) + w.clip * _cosine(e_img, e_src)


def sample_cycle_instructions(sample: TrainingSample,
                              rng: np.random.Generator | None = None,
                              ) -> tuple[str, str, LangMask, LangMask]:
    """Instruction/mask views used by the cycle term.

    Local pairs keep one instruction text both ways while the masks
    invert; other pairs draw uniformly from the stored paraphrases when
    an rng is supplied.
    """
    if sample.edit_type == "local":
        t = sample.forward_instruction
        return t, t, sample.forward_mask, sample.backward_mask
    fwd = sample.forward_paraphrases or (sample.forward_instruction,)
    bwd = sample.backward_paraphrases or (sample.backward_instruction,)
    if rng is not None:
        fwd_t = fwd[int(rng.integers(len(fwd)))]
        bwd_t = bwd[int(rng.integers(len(bwd)))]
    else:
        fwd_t, bwd_t = fwd[0], bwd[0]
    return fwd_t, bwd_t, sample.forward_mask, sample.backward_mask


def _scalar(value) -> float:
    # grad-carrying tensors must be detached before scalar conversion
    if hasattr(value, "detach"):
        value = value.detach()
    return float(value)


def loss_total(sample: TrainingSample, f: GeneratorContract,
               phi: PerceptualExtractor, provider, w: LossWeights,
               rng: np.random.Generator | None = None):
    """Weighted sum of the four terms with a per-term breakdown.

    Zero-weighted terms are skipped entirely, including their generator
    and embedding calls. The forward generator pass is shared between
    the supervised and alignment terms.
    """
    x_hat_t = None

    def forward():
        nonlocal x_hat_t
        if x_hat_t is None:
            x_hat_t = f.apply(sample.source_image,
                              sample.forward_instruction, sample.forward_mask)
        return x_hat_t

    breakdown = {}
    total = 0.0
    if w.sft or w.sft_lpips:
        term = loss_sft(sample.target_image, forward(), phi, w)
        breakdown["sft"] = _scalar(term)
        total = total + term
    else:
        breakdown["sft"] = 0.0
    if w.id or w.id_lpips:
        m = sample.forward_mask
        blank = blank_mask(m.height, m.width, m.dim)
        term = loss_identity(sample.source_image, f,
                             sample.backward_instruction, phi, w, blank)
        breakdown["id"] = _scalar(term)
        total = total + term
    else:
        breakdown["id"] = 0.0
    if w.cycle or w.cycle_lpips:
        t_t, t_s, m_t, m_s = sample_cycle_instructions(sample, rng)
        term = loss_cycle(sample.source_image, f, t_t, t_s, m_t, m_s, phi, w)
        breakdown["cycle"] = _scalar(term)
        total = total + term
    else:
        breakdown["cycle"] = 0.0
    if w.clip:
        term = loss_clip(forward(), sample.forward_instruction,
                         sample.backward_instruction, provider, w)
        breakdown["clip"] = _scalar(term)
        total = total + term
    else:
        breakdown["clip"] = 0.0
    return total, breakdown
