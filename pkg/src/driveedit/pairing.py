"""Pose-aligned pairing of frames across traversals of the same route.

A source frame is matched to the candidate frame from another traversal
minimizing position distance (meters, L2) plus absolute roll/pitch/yaw
differences (radians). Matches are accepted below a fixed threshold.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from typing import Iterable, Iterator

from .core import FramePose

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class PairingConfig:
    # The pairing threshold mixes meters and radians by construction of the
    # additive metric. Neither its value nor the neighborhood is pinned by
    # the method definition; both default here and are config-exposed.
    distance_threshold: float = 1.0
    radius: float = 10.0
    wrap_angles: bool = False
    traversals: frozenset[str] | None = None

    def __post_init__(self):
        if not self.distance_threshold > 0:
            raise ValueError("distance_threshold must be positive")
        if not self.radius > 0:
            raise ValueError("radius must be positive")


@dataclass(frozen=True)
class PairResult:
    source_frame_id: str
    target_frame_id: str
    source_traversal_id: str
    target_traversal_id: str
    distance: float
    accepted: bool


def _angle_diff(a: float, b: float, wrap: bool) -> float:
    d = abs(a - b)
    if wrap:
        d = min(d, _TWO_PI - d)
    return d


def pose_distance(a: FramePose, b: FramePose, wrap_angles: bool = False) -> float:
    """Position L2 plus summed absolute angle differences; symmetric, zero iff equal."""
    pos = math.dist(a.position, b.position)
    if not math.isfinite(pos):
        raise ValueError("non-finite pose positions")
    return (pos
            + _angle_diff(a.roll, b.roll, wrap_angles)
            + _angle_diff(a.pitch, b.pitch, wrap_angles)
            + _angle_diff(a.yaw, b.yaw, wrap_angles))


def pair_frames(source: FramePose, candidates: Iterable[FramePose],
                cfg: PairingConfig) -> PairResult | None:
    """Argmin of pose_distance over candidates; ties break by
    (distance, traversal_id, frame_id). None on an empty candidate set."""
    best = None
    best_key = None
    for cand in candidates:
        if cand.traversal_id == source.traversal_id:
            raise ValueError("candidates must come from other traversals")
        d = pose_distance(source, cand, cfg.wrap_angles)
        key = (d, cand.traversal_id, cand.frame_id)
        if best_key is None or key < best_key:
            best, best_key = cand, key
    if best is None:
        return None
    dist = best_key[0]
    return PairResult(
        source_frame_id=source.frame_id,
        target_frame_id=best.frame_id,
        source_traversal_id=source.traversal_id,
        target_traversal_id=best.traversal_id,
        distance=dist,
        accepted=dist <= cfg.distance_threshold,
    )


class _GridIndex:
    """Uniform 3D grid over frame positions, cell size = query radius.

    Built once, then read-only; a radius query scans the 27 cells around
    the query point and filters exactly.
    """

    def __init__(self, poses: Iterable[FramePose], radius: float):
        self.radius = radius
        self.cells: dict[tuple[int, int, int], list[FramePose]] = {}
        for p in poses:
            self.cells.setdefault(self._cell(p.position), []).append(p)

    def _cell(self, pos) -> tuple[int, int, int]:
        return tuple(math.floor(v / self.radius) for v in pos)

    def near(self, pos) -> Iterator[FramePose]:
        cx, cy, cz = self._cell(pos)
        r = self.radius
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                for dz in (-1, 0, 1):
                    for p in self.cells.get((cx + dx, cy + dy, cz + dz), ()):
                        if math.dist(pos, p.position) <= r:
                            yield p


def neighborhood(source: FramePose, index: _GridIndex,
                 cfg: PairingConfig) -> list[FramePose]:
    out = []
    for p in index.near(source.position):
        if p.traversal_id == source.traversal_id:
            continue
        if cfg.traversals is not None and p.traversal_id not in cfg.traversals:
            continue
        out.append(p)
    return out


def pair_logs(log: Iterable[FramePose], cfg: PairingConfig) -> Iterator[PairResult]:
    """Pair every source frame against its spatial neighborhood in other
    traversals; emits accepted results only, in input frame order."""
    frames = list(log)
    index = _GridIndex(frames, cfg.radius)
    for source in frames:
        result = pair_frames(source, neighborhood(source, index, cfg), cfg)
        if result is not None and result.accepted:
            yield result


def pair_logs_exhaustive(log: Iterable[FramePose],
                         cfg: PairingConfig) -> list[PairResult]:
    """O(n^2) reference pairing used to cross-check the grid index."""
    frames = list(log)
    out = []
    for source in frames:
        candidates = [
            c for c in frames
            if c.traversal_id != source.traversal_id
            and (cfg.traversals is None or c.traversal_id in cfg.traversals)
            and math.dist(source.position, c.position) <= cfg.radius
        ]
        result = pair_frames(source, candidates, cfg)
        if result is not None and result.accepted:
            out.append(result)
    return out


def validate_log(frames: Iterable[FramePose]) -> None:
    """Check timestamps strictly increase within each traversal."""
    last: dict[str, int] = {}
    for f in frames:
        prev = last.get(f.traversal_id)
        if prev is not None and f.timestamp <= prev:
            raise ValueError(
                f"timestamps not strictly increasing in traversal "
                f"{f.traversal_id!r} at frame {f.frame_id!r}")
        last[f.traversal_id] = f.timestamp


def load_poses(path: str | os.PathLike) -> list[FramePose]:
    """Read FramePose records from JSONL."""
    poses = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            poses.append(FramePose(
                position=tuple(d["position"]),
                roll=float(d["roll"]),
                pitch=float(d["pitch"]),
                yaw=float(d["yaw"]),
                timestamp=int(d["timestamp"]),
                traversal_id=d["traversal_id"],
                frame_id=d["frame_id"],
            ))
    return poses
