"""Evaluation protocol: pixel distances, embedding similarities, and the
edited-crop variants, aggregated per edit type.

Full-image metrics run on every pair. The crop variant restricts the
comparison to the tight bounding rectangle of the mask's binary
projection (padded a little so thin objects keep context); pairs with a
blank mask report no crop record.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core.images import as_float_image
from .core.types import LangMask, TrainingSample
from .langmask import project_binary

CROP_PAD_PX = 4


def pixel_metrics(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """(mean absolute difference, mean squared difference)."""
    x, y = as_float_image(a), as_float_image(b)
    if x.shape != y.shape:
        raise ValueError(f"image shapes differ: {x.shape} vs {y.shape}")
    diff = x.astype(np.float64) - y.astype(np.float64)
    return float(np.abs(diff).mean()), float((diff ** 2).mean())


def embedding_similarity(a: np.ndarray, b: np.ndarray, provider) -> float:
    """Cosine similarity of the provider's image embeddings."""
    ea = np.asarray(provider.image_embed(a), dtype=np.float64).reshape(-1)
    eb = np.asarray(provider.image_embed(b), dtype=np.float64).reshape(-1)
    na, nb = np.linalg.norm(ea), np.linalg.norm(eb)
    if na == 0.0 or nb == 0.0:
        raise ValueError("zero-norm image embedding")
    return float(ea @ eb / (na * nb))


def mask_crop_box(mask: LangMask, pad: int = CROP_PAD_PX) -> tuple | None:
    """Tight rectangle around the nonzero mask pixels, padded and clipped;
    None when the mask is blank."""
    binary = project_binary(mask)
    ys, xs = np.nonzero(binary)
    if ys.size == 0:
        return None
    x0 = max(int(xs.min()) - pad, 0)
    y0 = max(int(ys.min()) - pad, 0)
    x1 = min(int(xs.max()) + 1 + pad, mask.width)
    y1 = min(int(ys.max()) + 1 + pad, mask.height)
    return (x0, y0, x1, y1)


def _all_metrics(a: np.ndarray, b: np.ndarray, providers: dict) -> dict:
    l1, l2 = pixel_metrics(a, b)
    record = {"l1": l1, "l2": l2}
    for name, provider in providers.items():
        record[f"{name}_sim"] = embedding_similarity(a, b, provider)
    return record


def crop_metrics(output: np.ndarray, ground_truth: np.ndarray,
                 mask: LangMask, providers: dict,
                 pad: int = CROP_PAD_PX) -> dict | None:
    """All metrics on the edited-region crop; None for a blank mask."""
    box = mask_crop_box(mask, pad)
    if box is None:
        return None
    x0, y0, x1, y1 = box
    return _all_metrics(output[y0:y1, x0:x1], ground_truth[y0:y1, x0:x1],
                        providers)


@dataclass
class _Accumulator:
    count: int = 0
    sums: dict = None

    def add(self, record: dict):
        if self.sums is None:
            self.sums = {k: 0.0 for k in record}
        self.count += 1
        for k, v in record.items():
            self.sums[k] += v

    def means(self) -> dict:
        if not self.count:
            return {}
        return {k: v / self.count for k, v in self.sums.items()}


def evaluate_records(records, providers: dict) -> dict:
    """Aggregate metrics over (sample, model output) pairs.

    Returns per-edit-type and overall rows, each carrying full-image
    means, crop means where masks exist, and both row counts.
    """
    groups: dict[str, dict[str, _Accumulator]] = {}

    def bucket(name: str) -> dict:
        if name not in groups:
            groups[name] = {"full": _Accumulator(), "crop": _Accumulator()}
        return groups[name]

    for sample, output in records:
        out = as_float_image(output)
        full = _all_metrics(out, sample.target_image, providers)
        crop = crop_metrics(out, sample.target_image, sample.forward_mask,
                            providers)
        for name in (sample.edit_type, "overall"):
            bucket(name)["full"].add(full)
            if crop is not None:
                bucket(name)["crop"].add(crop)
    table = {}
    for name, accs in groups.items():
        table[name] = {
            "count": accs["full"].count,
            "full": accs["full"].means(),
            "crop_count": accs["crop"].count,
            "crop": accs["crop"].means(),
        }
    return table


def evaluate_manifest(entries, outputs: dict, providers: dict) -> dict:
    """Manifest-driven variant: ``outputs`` maps pair_id to an image."""
    from .core.serialization import load_sample

    records = []
    for entry in entries:
        sample = entry if isinstance(entry, TrainingSample) else load_sample(entry)
        if sample.pair_id not in outputs:
            raise KeyError(f"no model output for pair {sample.pair_id}")
        records.append((sample, outputs[sample.pair_id]))
    return evaluate_records(records, providers)
