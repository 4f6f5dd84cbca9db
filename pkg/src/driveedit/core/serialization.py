"""Binary mask container, training manifest, and checkpoint serialization.

LMSK layout (all integers 32-bit little-endian unsigned):

    magic "LMSK" | version | H | W | D
    H*W*D float32 little-endian, row-major (y, x, channel)
    trailer byte length | UTF-8 JSON list of the mask's specs

Round-trips are bit-exact. The JSON trailer makes masks self-describing,
so sessions can be reloaded from the mask file alone.
"""
from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from .types import (EditSpec, LangMask, TrainingSample, spec_from_dict,
                    spec_to_dict)

MASK_MAGIC = b"LMSK"
MASK_VERSION = 1

CHECKPOINT_MAGIC = b"CKPT"
CHECKPOINT_VERSION = 1

MANIFEST_KEYS = (
    "pair_id", "source_path", "target_path", "forward_instruction",
    "backward_instruction", "forward_mask_path", "backward_mask_path",
    "edit_type", "split",
)


class MaskFormatError(ValueError):
    """Raised on bad magic, version, or truncated mask files."""


def mask_to_bytes(mask: LangMask) -> bytes:
    trailer = json.dumps([spec_to_dict(s) for s in mask.specs],
                         ensure_ascii=False).encode("utf-8")
    header = MASK_MAGIC + struct.pack(
        "<IIII", MASK_VERSION, mask.height, mask.width, mask.dim)
    body = np.ascontiguousarray(mask.data, dtype="<f4").tobytes()
    return header + body + struct.pack("<I", len(trailer)) + trailer


def mask_from_bytes(blob: bytes, origin: str = "<bytes>") -> LangMask:
    if len(blob) < 20 or blob[:4] != MASK_MAGIC:
        raise MaskFormatError(f"{origin}: not an LMSK blob")
    version, h, w, d = struct.unpack("<IIII", blob[4:20])
    if version != MASK_VERSION:
        raise MaskFormatError(f"{origin}: unsupported version {version}")
    body_end = 20 + 4 * h * w * d
    if len(blob) < body_end + 4:
        raise MaskFormatError(f"{origin}: truncated mask body")
    data = np.frombuffer(blob[20:body_end], dtype="<f4").reshape(h, w, d)
    (trailer_len,) = struct.unpack("<I", blob[body_end:body_end + 4])
    trailer = blob[body_end + 4:body_end + 4 + trailer_len]
    if len(trailer) != trailer_len:
        raise MaskFormatError(f"{origin}: truncated spec trailer")
    try:
        specs = tuple(spec_from_dict(s) for s in json.loads(trailer.decode("utf-8")))
    except (json.JSONDecodeError, KeyError, UnicodeDecodeError) as e:
        raise MaskFormatError(f"{origin}: bad spec trailer: {e}") from e
    return LangMask(height=h, width=w, dim=d, data=data, specs=specs)


def serialize_mask(mask: LangMask, path: str | os.PathLike) -> int:
    """Write ``mask`` to ``path`` in the LMSK layout; returns bytes written."""
    blob = mask_to_bytes(mask)
    with open(path, "wb") as f:
        f.write(blob)
    return len(blob)


def deserialize_mask(path: str | os.PathLike) -> LangMask:
    with open(path, "rb") as f:
        blob = f.read()
    return mask_from_bytes(blob, origin=str(path))


@dataclass(frozen=True)
class ManifestEntry:
    """Per-sample metadata row of the training manifest."""

    pair_id: str
    source_path: str
    target_path: str
    forward_instruction: str
    backward_instruction: str
    forward_mask_path: str
    backward_mask_path: str
    edit_type: str
    split: str = "train"

    def referenced_paths(self) -> tuple[str, ...]:
        return (self.source_path, self.target_path,
                self.forward_mask_path, self.backward_mask_path)


@dataclass
class ManifestResult:
    written: int = 0
    rejected: list[tuple[ManifestEntry, str]] = field(default_factory=list)


def write_manifest(entries, path: str | os.PathLike,
                   check_files: bool = True) -> ManifestResult:
    """Write one JSON object per entry, in input order, deterministic key order.

    Entries referencing missing files are reported in the result and skipped;
    the stream continues.
    """
    result = ManifestResult()
    with open(path, "w", encoding="utf-8") as f:
        for entry in entries:
            if check_files:
                missing = [p for p in entry.referenced_paths()
                           if not os.path.exists(p)]
                if missing:
                    result.rejected.append(
                        (entry, f"missing files: {', '.join(missing)}"))
                    continue
            record = {k: getattr(entry, k) for k in MANIFEST_KEYS}
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
            result.written += 1
    return result


def read_manifest(path: str | os.PathLike) -> list[ManifestEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            entries.append(ManifestEntry(**{k: d[k] for k in MANIFEST_KEYS}))
    return entries


def save_sample(sample: TrainingSample, root: str | os.PathLike,
                split: str = "train") -> ManifestEntry:
    """Persist one sample under ``root`` and return its manifest row.

    Layout: ``<root>/<pair_id>/{source,target}.npy`` plus the two masks
    in the LMSK format. Paths in the row are absolute.
    """
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in sample.pair_id)
    d = os.path.abspath(os.path.join(root, safe))
    os.makedirs(d, exist_ok=True)
    paths = {
        "source_path": os.path.join(d, "source.npy"),
        "target_path": os.path.join(d, "target.npy"),
        "forward_mask_path": os.path.join(d, "forward.lmsk"),
        "backward_mask_path": os.path.join(d, "backward.lmsk"),
    }
    np.save(paths["source_path"], sample.source_image)
    np.save(paths["target_path"], sample.target_image)
    serialize_mask(sample.forward_mask, paths["forward_mask_path"])
    serialize_mask(sample.backward_mask, paths["backward_mask_path"])
    return ManifestEntry(
        pair_id=sample.pair_id,
        forward_instruction=sample.forward_instruction,
        backward_instruction=sample.backward_instruction,
        edit_type=sample.edit_type,
        split=split,
        **paths,
    )


def load_sample(entry: ManifestEntry) -> TrainingSample:
    return TrainingSample(
        pair_id=entry.pair_id,
        source_image=np.load(entry.source_path),
        target_image=np.load(entry.target_path),
        forward_instruction=entry.forward_instruction,
        backward_instruction=entry.backward_instruction,
        forward_mask=deserialize_mask(entry.forward_mask_path),
        backward_mask=deserialize_mask(entry.backward_mask_path),
        edit_type=entry.edit_type,
    )


class CheckpointFormatError(ValueError):
    """Raised on bad magic, version, or truncated checkpoint files."""


def save_arrays(arrays: dict[str, np.ndarray], path: str | os.PathLike,
                meta: dict | None = None) -> int:
    """Write named float arrays in the LMSK-style container with a JSON manifest."""
    manifest = {"meta": meta or {}, "params": []}
    payload = b""
    for name, arr in arrays.items():
        raw = np.ascontiguousarray(arr, dtype="<f4").tobytes()
        manifest["params"].append(
            {"name": name, "shape": list(arr.shape), "offset": len(payload)})
        payload += raw
    manifest_bytes = json.dumps(manifest, ensure_ascii=False).encode("utf-8")
    blob = (CHECKPOINT_MAGIC
            + struct.pack("<II", CHECKPOINT_VERSION, len(manifest_bytes))
            + manifest_bytes + payload)
    with open(path, "wb") as f:
        f.write(blob)
    return len(blob)


def load_arrays(path: str | os.PathLike) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointFormatError(f"{path}: not a checkpoint file")
    version, mlen = struct.unpack("<II", blob[4:12])
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"{path}: unsupported version {version}")
    if len(blob) < 12 + mlen:
        raise CheckpointFormatError(f"{path}: truncated manifest")
    manifest = json.loads(blob[12:12 + mlen].decode("utf-8"))
    payload = blob[12 + mlen:]
    arrays = {}
    for p in manifest["params"]:
        shape = tuple(p["shape"])
        n = int(np.prod(shape)) if shape else 1
        start = p["offset"]
        raw = payload[start:start + 4 * n]
        if len(raw) != 4 * n:
            raise CheckpointFormatError(f"{path}: truncated data for {p['name']}")
        arrays[p["name"]] = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
    return arrays, manifest["meta"]
