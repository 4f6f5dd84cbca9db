"""Capture a contract transcript from the edit service for the UI tests.

Runs the real HTTP app in-process with deterministic mock backends and
records every request/response the studio UI exercises: session creation
(good, empty-scene, and rejected uploads), the picker banks, two edits,
the mask in every intermediate state, two renders, and the error
envelopes. The vitest suite replays these bytes through a stub fetch, so
the UI is tested against genuine service output without a Python runtime.

Run from the repository root after installing the Python package:

    python3 frontend/scripts/generate_fixtures.py
"""

import base64
import io
import json
import pathlib

import numpy as np
from fastapi.testclient import TestClient
from PIL import Image

from driveedit.backends import (
    BicubicUpscaler,
    BoxSegmenter,
    ConstantDepth,
    EchoDiffLLM,
    HashEmbeddingProvider,
    HeuristicVerifier,
    IdentityGenerator,
    MockCaptioner,
    StaticDetector,
)
from driveedit.core.images import to_uint8
from driveedit.editsvc.app import build_app

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "contract.json"

CAR_BOX = (4, 10, 18, 20)


def scene_image():
    rng = np.random.default_rng(7)
    img = np.clip(rng.normal(0.45, 0.05, (24, 24, 3)), 0, 1).astype(np.float32)
    img[10:20, 4:18] = (0.8, 0.1, 0.1)
    return img


def empty_scene_image():
    return np.full((16, 16, 3), 0.25, dtype=np.float32)


def make_suite(detections):
    return {
        "detector": StaticDetector(detections),
        "segmenter": BoxSegmenter(),
        "depth": ConstantDepth(12.0),
        "captioner": MockCaptioner(seed=0),
        "generator": IdentityGenerator(),
        "verifier": HeuristicVerifier(),
        "sr": BicubicUpscaler(),
        "embedding": HashEmbeddingProvider(dim=8, seed=0),
        "llm": EchoDiffLLM(),
        "score_threshold": 0.3,
        "prompt_path": None,
    }


def npy_bytes(img):
    buf = io.BytesIO()
    np.save(buf, img)
    return buf.getvalue()


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def png_pixels(data: bytes):
    return np.asarray(Image.open(io.BytesIO(data))).tolist()


def main():
    client = TestClient(build_app(make_suite([("car", CAR_BOX, 0.9)])),
                        raise_server_exceptions=False)
    empty_client = TestClient(build_app(make_suite([])),
                              raise_server_exceptions=False)

    img = scene_image()
    scene_npy = npy_bytes(img)
    empty_npy = npy_bytes(empty_scene_image())
    bad_body = b"not an image at all"

    fx = {
        "image": {
            "npy_b64": b64(scene_npy),
            "width": 24,
            "height": 24,
            "uint8": to_uint8(img).tolist(),
        },
        "empty_image": {"npy_b64": b64(empty_npy)},
        "bad_upload": {"body_b64": b64(bad_body)},
    }

    fx["banks"] = client.get("/banks").json()

    r = client.post("/sessions", content=scene_npy,
                    headers={"content-type": "application/octet-stream"})
    assert r.status_code == 201, r.text
    created = r.json()
    sid = created["session_id"]
    fx["create"] = created

    r = empty_client.post("/sessions", content=empty_npy,
                          headers={"content-type": "application/octet-stream"})
    assert r.status_code == 201, r.text
    assert r.json()["annotation"]["instances"] == []
    fx["create_empty"] = r.json()
    png = empty_client.get(f"/sessions/{r.json()['session_id']}/mask.png")
    assert png.status_code == 200
    fx["empty_mask"] = {"png_b64": b64(png.content),
                        "pixels": png_pixels(png.content)}

    r = client.post("/sessions", content=bad_body,
                    headers={"content-type": "application/octet-stream"})
    assert r.status_code == 400
    fx["bad_upload"]["status"] = 400
    fx["bad_upload"]["response"] = r.json()

    r = client.get("/sessions/does-not-exist")
    assert r.status_code == 404
    fx["unknown_session"] = {"status": 404, "response": r.json()}

    def mask_state():
        png = client.get(f"/sessions/{sid}/mask.png")
        assert png.status_code == 200
        return {"png_b64": b64(png.content), "pixels": png_pixels(png.content)}

    fx["masks"] = {"e0": mask_state()}

    edits = [
        {"action": "replace", "bbox": [5, 10, 18, 20],
         "target_description": "blue truck"},
        {"action": "insert", "bbox": [0, 0, 6, 6],
         "target_description": "green bus"},
    ]
    fx["edits"] = []
    fx["snapshots"] = {"e0r0": created}
    for n, payload in enumerate(edits, start=1):
        r = client.post(f"/sessions/{sid}/edits", json=payload)
        assert r.status_code == 201, r.text
        snap = client.get(f"/sessions/{sid}").json()
        fx["edits"].append({"request": payload, "response": r.json()})
        fx["snapshots"][f"e{n}r0"] = snap
        fx["masks"][f"e{n}"] = mask_state()

    bad_edit = {"action": "modify", "bbox": [0, 0, 4, 4]}
    r = client.post(f"/sessions/{sid}/edits", json=bad_edit)
    assert r.status_code == 400
    fx["bad_edit"] = {"request": bad_edit, "status": 400, "response": r.json()}

    lmsk = client.get(f"/sessions/{sid}/mask")
    assert lmsk.status_code == 200
    fx["lmsk_b64"] = b64(lmsk.content)

    fx["renders"] = []
    for n in (1, 2):
        body = {"global_prompt": "make it rainy"} if n == 2 else None
        r = client.post(f"/sessions/{sid}/render", json=body)
        assert r.status_code == 200, r.text
        assert r.json()["history_length"] == n
        fx["renders"].append({"request": body, "response": r.json()})
        fx["snapshots"][f"e2r{n}"] = client.get(f"/sessions/{sid}").json()

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fx, indent=1))
    print(f"wrote {OUT} ({OUT.stat().st_size} bytes)")


if __name__ == "__main__":
    main()
