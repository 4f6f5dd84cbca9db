"""Language-conditioned mask construction.

Each edit's sentence embedding is written into every pixel of its bounding
box. Specs are assembled in order of decreasing object distance so nearer
objects overwrite farther ones on overlap.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import EditSpec, InstanceRecord, LangMask, box_area


@dataclass(frozen=True)
class FilterRules:
    """Instance-filtering thresholds. The qualitative rules (far objects
    excluded unless large; truncated boxes dropped) are fixed here as
    documented, overridable constants."""

    far_distance_m: float = 50.0
    far_min_area_frac: float = 0.02
    border_margin_px: int = 2
    truncated_max_area_frac: float = 0.005


DEFAULT_RULES = FilterRules()


def filter_instances(instances, width: int, height: int,
                     rules: FilterRules = DEFAULT_RULES) -> list[InstanceRecord]:
    """Drop far-away and truncated instances; overlapping boxes all survive."""
    image_area = float(width * height)
    kept = []
    for inst in instances:
        x0, y0, x1, y1 = inst.bbox
        area_frac = box_area(inst.bbox) / image_area
        if inst.distance_m > rules.far_distance_m and area_frac < rules.far_min_area_frac:
            continue
        near_border = (x0 <= rules.border_margin_px
                       or y0 <= rules.border_margin_px
                       or x1 >= width - rules.border_margin_px
                       or y1 >= height - rules.border_margin_px)
        if near_border and area_frac < rules.truncated_max_area_frac:
            continue
        kept.append(inst)
    return kept


def assembly_order(specs) -> list[EditSpec]:
    """Decreasing distance; ties broken by larger box area, then sentence."""
    return sorted(specs, key=lambda s: (-s.distance_m, -box_area(s.bbox),
                                        s.instruction_sentence))


def build_langmask(specs, height: int, width: int, provider) -> LangMask:
    """Rasterize spec sentence embeddings into an H x W x D tensor."""
    dim = provider.dim
    data = np.zeros((height, width, dim), dtype=np.float32)
    ordered = assembly_order(specs)
    for spec in ordered:
        x0, y0, x1, y1 = spec.bbox
        if x1 > width or y1 > height:
            raise ValueError(f"spec bbox {spec.bbox} outside {width}x{height}")
        vec = np.asarray(provider.text_embed(spec.instruction_sentence),
                         dtype=np.float32)
        if vec.shape != (dim,):
            raise ValueError(
                f"embedding dim {vec.shape} != provider dim ({dim},)")
        data[y0:y1, x0:x1, :] = vec
    return LangMask(height=height, width=width, dim=dim, data=data,
                    specs=tuple(ordered))


def blank_mask(height: int, width: int, dim: int) -> LangMask:
    return LangMask(height=height, width=width, dim=dim,
                    data=np.zeros((height, width, dim), dtype=np.float32))


def project_binary(mask: LangMask) -> np.ndarray:
    """H x W uint8 indicator: 1 where the pixel embedding is non-zero."""
    return np.any(mask.data != 0, axis=2).astype(np.uint8)
