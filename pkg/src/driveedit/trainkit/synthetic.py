"""Procedural 64x64 driving scenes with exact edit supervision.

Each scene is a sky/grass/road composition with a few colored rectangles
standing in for vehicles. Because the renderer applies the edits itself,
every sample carries pixel-perfect before/after images, the instruction
text, and the matching language masks, which makes the training loop
verifiable end to end.
"""
from __future__ import annotations

import numpy as np

from ..backends import HashEmbeddingProvider
from ..banks import build_sentence, global_edit_sentence, load_templates
from ..core.types import EditSpec, TrainingSample
from ..langmask import blank_mask, build_langmask

SIZE = 64
MASK_DIM = 16

IDENTITY_INSTRUCTION = "keep the overall scene appearance unchanged"

_PALETTE = {
    "red": (0.85, 0.10, 0.10),
    "blue": (0.10, 0.20, 0.85),
    "green": (0.10, 0.70, 0.20),
    "yellow": (0.90, 0.85, 0.10),
    "black": (0.05, 0.05, 0.05),
    "white": (0.95, 0.95, 0.95),
    "silver": (0.75, 0.75, 0.78),
    "grey": (0.50, 0.50, 0.50),
}

_WEATHER_TINTS = {
    "Foggy": ("blend", (0.72, 0.72, 0.74), 0.55),
    "Sunny": ("add", (0.10, 0.08, 0.02), 1.0),
    "Rainy": ("blend", (0.35, 0.38, 0.45), 0.35),
    "Snowy": ("blend", (0.88, 0.88, 0.92), 0.45),
}

_ROAD_TOP, _ROAD_BOTTOM = 38, 58
_KINDS = ("modify", "delete", "insert", "global", "identity")
_KIND_P = (0.3, 0.2, 0.2, 0.15, 0.15)


def _base_scene(rng: np.random.Generator) -> np.ndarray:
    img = np.zeros((SIZE, SIZE, 3), dtype=np.float32)
    sky = np.array([0.55, 0.70, 0.90], np.float32) + rng.uniform(-0.05, 0.05, 3)
    grass = np.array([0.25, 0.55, 0.25], np.float32) + rng.uniform(-0.05, 0.05, 3)
    road = np.float32(0.32 + rng.uniform(-0.03, 0.03))
    img[:_ROAD_TOP] = sky.astype(np.float32)
    img[_ROAD_TOP:_ROAD_BOTTOM] = road
    img[_ROAD_BOTTOM:] = grass.astype(np.float32)
    # lane dashes
    img[47:49, ::8] = 0.9
    return np.clip(img, 0.0, 1.0)


def _place_vehicles(img: np.ndarray, rng: np.random.Generator):
    """Draw 1..3 non-overlapping rectangles on the road; returns their
    (color_name, bbox) records."""
    count = int(rng.integers(1, 4))
    placed = []
    names = list(_PALETTE)
    for _ in range(count):
        w = int(rng.integers(8, 15))
        h = int(rng.integers(6, 11))
        for _attempt in range(20):
            x0 = int(rng.integers(2, SIZE - w - 2))
            y0 = int(rng.integers(_ROAD_TOP + 1, _ROAD_BOTTOM - h))
            box = (x0, y0, x0 + w, y0 + h)
            if all(box[2] <= b[0] or b[2] <= box[0] for _, b in placed):
                break
        else:
            continue
        color = names[int(rng.integers(len(names)))]
        img[box[1]:box[3], box[0]:box[2]] = _PALETTE[color]
        placed.append((color, box))
    return placed


def _paint(img: np.ndarray, box, color_name: str) -> np.ndarray:
    out = img.copy()
    out[box[1]:box[3], box[0]:box[2]] = _PALETTE[color_name]
    return out


def _erase(img: np.ndarray, background: np.ndarray, box) -> np.ndarray:
    out = img.copy()
    out[box[1]:box[3], box[0]:box[2]] = background[box[1]:box[3], box[0]:box[2]]
    return out


def _tint(img: np.ndarray, weather: str) -> np.ndarray:
    mode, rgb, amount = _WEATHER_TINTS[weather]
    color = np.array(rgb, dtype=np.float32)
    if mode == "add":
        return np.clip(img + amount * color, 0.0, 1.0)
    return np.clip(img * (1.0 - amount) + color * amount, 0.0, 1.0)


def _distance_for(box) -> float:
    # nearer to the bottom of the frame reads as closer to the camera
    return float(5.0 + (SIZE - box[3]) * 0.8)


def _vehicle_spec(action: str, box, subject: str,
                  target: str | None, templates) -> EditSpec:
    if action == "delete":
        sentence = build_sentence("delete", subject, templates=templates)
        target_desc = None
    elif action == "insert":
        sentence = build_sentence("insert", subject, target, templates=templates)
        target_desc = target
    else:
        sentence = build_sentence(action, subject, target, templates=templates)
        target_desc = target
    return EditSpec(action=action, subject_class="car", bbox=box,
                    distance_m=_distance_for(box),
                    instruction_sentence=sentence,
                    target_description=target_desc)


def make_synthetic_dataset(n: int, seed: int,
                           provider: HashEmbeddingProvider | None = None,
                           ) -> list[TrainingSample]:
    """Render ``n`` deterministic edit pairs for the toy trainer."""
    provider = provider or HashEmbeddingProvider(dim=MASK_DIM, seed=0)
    templates = load_templates()
    rng = np.random.default_rng(seed)
    samples = []
    for i in range(n):
        base = _base_scene(rng)
        scene = base.copy()
        vehicles = _place_vehicles(scene, rng)
        kind = _KINDS[int(rng.choice(len(_KINDS), p=_KIND_P))]
        if not vehicles and kind in ("modify", "delete", "insert"):
            kind = "global"
        pair_id = f"syn-{seed}-{i}:{kind}"
        if kind == "identity":
            blank = blank_mask(SIZE, SIZE, provider.dim)
            samples.append(TrainingSample(
                pair_id=pair_id, source_image=scene, target_image=scene,
                forward_instruction=IDENTITY_INSTRUCTION,
                backward_instruction=IDENTITY_INSTRUCTION,
                forward_mask=blank, backward_mask=blank,
                edit_type="identity"))
            continue
        if kind == "global":
            weathers = list(_WEATHER_TINTS)
            weather = weathers[int(rng.integers(len(weathers)))]
            edited = _tint(scene, weather)
            instr = global_edit_sentence("weather", weather)
            back = global_edit_sentence("weather", "Cloudy")
            blank = blank_mask(SIZE, SIZE, provider.dim)
            samples.append(TrainingSample(
                pair_id=pair_id, source_image=scene, target_image=edited,
                forward_instruction=instr, backward_instruction=back,
                forward_mask=blank, backward_mask=blank,
                edit_type="global",
                forward_paraphrases=(instr, f"make the weather {weather}"),
                backward_paraphrases=(back, "make the weather Cloudy")))
            continue
        idx = int(rng.integers(len(vehicles)))
        color, box = vehicles[idx]
        subject = f"{color} car"
        if kind == "modify":
            other = [c for c in _PALETTE if c != color]
            new_color = other[int(rng.integers(len(other)))]
            edited = _paint(scene, box, new_color)
            fwd = _vehicle_spec("modify", box, subject, new_color, templates)
            bwd = _vehicle_spec("modify", box, f"{new_color} car", color, templates)
            source, target = scene, edited
        elif kind == "delete":
            edited = _erase(scene, base, box)
            fwd = _vehicle_spec("delete", box, subject, None, templates)
            bwd = _vehicle_spec("insert", box, subject, subject, templates)
            source, target = scene, edited
        else:  # insert: the source lacks the vehicle, the target has it
            without = _erase(scene, base, box)
            fwd = _vehicle_spec("insert", box, subject, subject, templates)
            bwd = _vehicle_spec("delete", box, subject, None, templates)
            source, target = without, scene
        samples.append(TrainingSample(
            pair_id=pair_id, source_image=source, target_image=target,
            forward_instruction=fwd.instruction_sentence,
            backward_instruction=bwd.instruction_sentence,
            forward_mask=build_langmask([fwd], SIZE, SIZE, provider),
            backward_mask=build_langmask([bwd], SIZE, SIZE, provider),
            edit_type="local"))
    return samples
