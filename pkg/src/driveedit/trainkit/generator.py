"""Small differentiable generator and mock perceptual/embedding backends.

The generator is a two-convolution residual network conditioned on a
broadcast text embedding and the language-mask channels. The weights
reading the mask channels start at exactly zero, so a freshly built
model is bit-for-bit indifferent to the mask content; training moves
them off zero.
"""
from __future__ import annotations

import numpy as np
import torch
from torch import nn

from ..backends import HashEmbeddingProvider
from ..core.serialization import load_arrays, save_arrays
from ..core.types import LangMask

_HIDDEN = 16


def _to_tensor(image, dtype: torch.dtype) -> torch.Tensor:
    if isinstance(image, torch.Tensor):
        return image.to(dtype)
    arr = np.ascontiguousarray(image, dtype=np.float32)
    return torch.from_numpy(arr.copy()).to(dtype)


class ToyGenerator(nn.Module):
    """(image, instruction, mask) -> image editor for desk-scale training."""

    def __init__(self, text_dim: int = 16, mask_dim: int = 16,
                 hidden: int = _HIDDEN, seed: int = 0,
                 embedder: HashEmbeddingProvider | None = None,
                 dtype: torch.dtype = torch.float32):
        super().__init__()
        self.text_dim = text_dim
        self.mask_dim = mask_dim
        self.dtype = dtype
        self.embedder = embedder or HashEmbeddingProvider(dim=text_dim, seed=0)
        if self.embedder.dim != text_dim:
            raise ValueError("text embedder dim mismatch")
        in_ch = 3 + text_dim + mask_dim
        torch.manual_seed(seed)
        self.conv1 = nn.Conv2d(in_ch, hidden, 3, padding=1)
        self.conv2 = nn.Conv2d(hidden, 3, 3, padding=1)
        with torch.no_grad():
            # mask channels contribute nothing until training moves them
            self.conv1.weight[:, 3 + text_dim:, :, :].zero_()
        self.to(dtype)

    def param_count(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def apply(self, image, instruction: str, mask: LangMask) -> torch.Tensor:
        x = _to_tensor(image, self.dtype)
        if x.ndim != 3 or x.shape[2] != 3:
            raise ValueError(f"expected HxWx3 image, got {tuple(x.shape)}")
        h, w = int(x.shape[0]), int(x.shape[1])
        if (mask.height, mask.width, mask.dim) != (h, w, self.mask_dim):
            raise ValueError("mask dims do not match image/model")
        text = torch.from_numpy(
            np.ascontiguousarray(self.embedder.text_embed(instruction))
        ).to(self.dtype)
        mask_t = torch.from_numpy(np.array(mask.data)).to(self.dtype)
        planes = torch.cat([
            x.permute(2, 0, 1),
            text.reshape(-1, 1, 1).expand(self.text_dim, h, w),
            mask_t.permute(2, 0, 1),
        ]).unsqueeze(0)
        residual = self.conv2(torch.tanh(self.conv1(planes)))
        return x + residual[0].permute(1, 2, 0)

    # --- checkpointing -------------------------------------------------------

    def save(self, path, meta: dict | None = None) -> int:
        arrays = {k: v.detach().cpu().numpy() for k, v in self.state_dict().items()}
        info = {"text_dim": self.text_dim, "mask_dim": self.mask_dim,
                "hidden": self.conv1.out_channels}
        info.update(meta or {})
        return save_arrays(arrays, path, meta=info)

    def load(self, path) -> dict:
        arrays, meta = load_arrays(path)
        state = {k: torch.from_numpy(v).to(self.dtype) for k, v in arrays.items()}
        self.load_state_dict(state)
        return meta

    @classmethod
    def from_checkpoint(cls, path, seed: int = 0,
                        embedder: HashEmbeddingProvider | None = None,
                        ) -> "ToyGenerator":
        _, meta = load_arrays(path)
        gen = cls(text_dim=int(meta["text_dim"]), mask_dim=int(meta["mask_dim"]),
                  hidden=int(meta["hidden"]), seed=seed, embedder=embedder)
        gen.load(path)
        return gen


class PoolPerceptual:
    """Two-scale normalized feature stand-in for a pretrained extractor."""

    def features(self, image) -> list:
        x = image if isinstance(image, torch.Tensor) else \
            _to_tensor(image, torch.float32)
        maps = []
        for stride in (1, 2):
            f = x[::stride, ::stride]
            f = f - f.mean()
            maps.append(f / ((f * f).mean() ** 0.5 + 1e-6))
        return maps


class ToyClipEmbedder:
    """Differentiable image embedding from quadrant color statistics,
    paired with hashed unit vectors for text."""

    def __init__(self, dim: int = 16, seed: int = 0):
        self.dim = dim
        rng = np.random.default_rng(seed)
        proj = rng.standard_normal((dim, 4, 3)) / np.sqrt(12.0)
        self._proj = torch.from_numpy(proj.astype(np.float32))
        self._text = HashEmbeddingProvider(dim=dim, seed=seed)

    def text_embed(self, text: str) -> np.ndarray:
        return self._text.text_embed(text)

    def image_embed(self, image) -> torch.Tensor:
        x = image if isinstance(image, torch.Tensor) else \
            _to_tensor(image, torch.float32)
        h2, w2 = x.shape[0] // 2, x.shape[1] // 2
        quads = torch.stack([
            x[:h2, :w2].mean(dim=(0, 1)),
            x[:h2, w2:].mean(dim=(0, 1)),
            x[h2:, :w2].mean(dim=(0, 1)),
            x[h2:, w2:].mean(dim=(0, 1)),
        ])
        return (self._proj.to(quads.dtype) * quads).sum(dim=(1, 2))
