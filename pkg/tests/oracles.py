"""Independent reference implementations used to derive expected test values.

Everything in this module is written from the documented contracts alone and
deliberately avoids the library's own helpers: brute-force scans instead of
grid indexes, per-pixel loops instead of slice assignment, dense linear solves
instead of iterative relaxation.  Tests compare library output against these.
"""

from __future__ import annotations

import math

import numpy as np


# ---------------------------------------------------------------------------
# pose pairing


def oracle_pose_distance(a, b, wrap_angles: bool = False) -> float:
    dx = a.position[0] - b.position[0]
    dy = a.position[1] - b.position[1]
    dz = a.position[2] - b.position[2]
    pos = math.sqrt(dx * dx + dy * dy + dz * dz)
    total = pos
    for u, v in ((a.roll, b.roll), (a.pitch, b.pitch), (a.yaw, b.yaw)):
        d = abs(u - v)
        if wrap_angles:
            d = min(d, 2.0 * math.pi - d)
        total += d
    return total


def oracle_pair_all(frames, cfg):
    """Exhaustive argmin pairing over every source frame.

    Candidates are frames from any other traversal whose positional distance
    is within cfg.radius.  Ties break on (distance, traversal_id, frame_id).
    Returns a list of (source_frame_id, target_frame_id, distance) for
    accepted sources only, in input order.
    """
    results = []
    for src in frames:
        best_key = None
        best = None
        for cand in frames:
            if cand.traversal_id == src.traversal_id:
                continue
            if math.dist(src.position, cand.position) > cfg.radius:
                continue
            d = oracle_pose_distance(src, cand, cfg.wrap_angles)
            key = (d, cand.traversal_id, cand.frame_id)
            if best_key is None or key < best_key:
                best_key = key
                best = cand
        if best is not None and best_key[0] <= cfg.distance_threshold:
            results.append((src.frame_id, best.frame_id, best_key[0]))
    return results


# ---------------------------------------------------------------------------
# language-conditioned masks


def oracle_langmask(specs, height: int, width: int, provider) -> np.ndarray:
    """Per-pixel reference rasterization.

    Specs are painted farthest first (ties: larger box area first, then
    instruction sentence), so the nearest spec ends up owning overlaps.
    """
    def area(s):
        x0, y0, x1, y1 = s.bbox
        return (x1 - x0) * (y1 - y0)

    ordered = sorted(
        specs,
        key=lambda s: (-s.distance_m, -area(s), s.instruction_sentence),
    )
    out = np.zeros((height, width, provider.dim), dtype=np.float32)
    for spec in ordered:
        vec = np.asarray(
            provider.text_embed(spec.instruction_sentence), dtype=np.float32
        )
        x0, y0, x1, y1 = spec.bbox
        for y in range(y0, y1):
            for x in range(x0, x1):
                for d in range(provider.dim):
                    out[y, x, d] = vec[d]
    return out


def oracle_nearest_spec(specs, y: int, x: int):
    """The spec that should own pixel (y, x), or None if uncovered."""
    def area(s):
        x0, y0, x1, y1 = s.bbox
        return (x1 - x0) * (y1 - y0)

    covering = [
        s for s in specs
        if s.bbox[0] <= x < s.bbox[2] and s.bbox[1] <= y < s.bbox[3]
    ]
    if not covering:
        return None
    # painted farthest-first, so the last element of the order owns the pixel
    order = sorted(
        covering,
        key=lambda s: (-s.distance_m, -area(s), s.instruction_sentence),
    )
    return order[-1]


# ---------------------------------------------------------------------------
# gradient-domain compositing


def dense_poisson_blend(target: np.ndarray, source: np.ndarray,
                        mask: np.ndarray) -> np.ndarray:
    """Direct dense solve of the masked Poisson system.

    For every masked pixel p:  4 f[p] - sum_{q in N4(p), masked} f[q]
    equals  Lap(source)[p] + sum_{q in N4(p), unmasked} target[q].
    Solved channel by channel with numpy.linalg.solve.
    """
    squeeze = target.ndim == 2
    tgt = target.astype(np.float64)
    src = source.astype(np.float64)
    if squeeze:
        tgt = tgt[..., None]
        src = src[..., None]
    m = mask.astype(bool)
    ys, xs = np.nonzero(m)
    index = {(int(y), int(x)): k for k, (y, x) in enumerate(zip(ys, xs))}
    n = len(index)
    out = tgt.copy()
    for c in range(tgt.shape[2]):
        a = np.zeros((n, n), dtype=np.float64)
        b = np.zeros(n, dtype=np.float64)
        for (y, x), k in index.items():
            a[k, k] = 4.0
            b[k] = (
                4.0 * src[y, x, c]
                - src[y - 1, x, c] - src[y + 1, x, c]
                - src[y, x - 1, c] - src[y, x + 1, c]
            )
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if (ny, nx) in index:
                    a[k, index[(ny, nx)]] = -1.0
                else:
                    b[k] += tgt[ny, nx, c]
        sol = np.linalg.solve(a, b)
        for (y, x), k in index.items():
            out[y, x, c] = sol[k]
    return out[..., 0] if squeeze else out


def interior_laplacian_residual(result: np.ndarray, source: np.ndarray,
                                mask: np.ndarray) -> float:
    """Max |Lap(result) - Lap(source)| over masked pixels, computed per pixel."""
    res = result.astype(np.float64)
    src = source.astype(np.float64)
    if res.ndim == 2:
        res = res[..., None]
        src = src[..., None]
    worst = 0.0
    ys, xs = np.nonzero(mask.astype(bool))
    for y, x in zip(ys, xs):
        for c in range(res.shape[2]):
            lap_r = (4.0 * res[y, x, c] - res[y - 1, x, c] - res[y + 1, x, c]
                     - res[y, x - 1, c] - res[y, x + 1, c])
            lap_s = (4.0 * src[y, x, c] - src[y - 1, x, c] - src[y + 1, x, c]
                     - src[y, x - 1, c] - src[y, x + 1, c])
            worst = max(worst, abs(lap_r - lap_s))
    return worst
