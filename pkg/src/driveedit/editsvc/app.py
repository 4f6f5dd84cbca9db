"""HTTP facade over the edit-session workflow.

Endpoints (JSON in/out unless noted):

* ``POST /sessions`` — upload an image (raw body or ``{"image_b64"}``),
  get back the session id and the scene annotation.
* ``GET /banks`` — attribute banks and action lists for UI pickers.
* ``POST /sessions/{id}/edits`` — author one edit from a box, an action,
  and an optional target description.
* ``GET /sessions/{id}/mask`` — current language mask, LMSK binary.
* ``GET /sessions/{id}/mask.png`` — binary projection as grayscale PNG.
* ``POST /sessions/{id}/render`` — run the editing backend, append to
  history, return a preview.
* ``GET /sessions/{id}`` — session snapshot.

Errors are always ``{"code", "message"}``.
"""
from __future__ import annotations

import base64
import binascii
import io

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from .. import descriptor
from ..backends import (BackendError, SerializedBackend,
                        default_backend_suite, descriptor_backends)
from ..banks import DEFAULT_BANKS, build_sentence
from ..core.images import (as_float_image, decode_image_bytes,
                           encode_gray_png, encode_png)
from ..core.serialization import mask_to_bytes
from ..core.types import (ACTIONS, CLASS_LABELS, GLOBAL_ATTRIBUTE_VALUES,
                          Box, EditSpec, spec_to_dict)
from ..langmask import build_langmask, project_binary
from .sessions import EditSession, SessionNotFound, SessionStore

_MIN_DISTANCE_M = 1e-3


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


def _iou(a: Box, b: Box) -> float:
    ax0, ay0, ax1, ay1 = a
    bx0, by0, bx1, by1 = b
    ix0, iy0 = max(ax0, bx0), max(ay0, by0)
    ix1, iy1 = min(ax1, bx1), min(ay1, by1)
    if ix0 >= ix1 or iy0 >= iy1:
        return 0.0
    inter = (ix1 - ix0) * (iy1 - iy0)
    union = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter
    return inter / union


def _decode_upload(body: bytes, content_type: str) -> np.ndarray:
    if not body:
        raise ApiError(400, "bad_image", "empty request body")
    if content_type.startswith("application/json"):
        import json
        try:
            payload = json.loads(body)
            body = base64.b64decode(payload["image_b64"], validate=True)
        except (ValueError, KeyError, binascii.Error) as e:
            raise ApiError(400, "bad_image", f"undecodable JSON upload: {e}")
    if body[:6] == b"\x93NUMPY":
        try:
            arr = np.load(io.BytesIO(body), allow_pickle=False)
        except ValueError as e:
            raise ApiError(400, "bad_image", f"bad npy payload: {e}")
    else:
        try:
            arr = decode_image_bytes(body)
        except Exception as e:
            raise ApiError(400, "bad_image", f"undecodable image: {e}")
    img = as_float_image(arr)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ApiError(400, "bad_image", f"expected HxWx3, got {arr.shape}")
    img.setflags(write=False)
    return img


def _guess_class(target_description: str | None, crop_description: str) -> str:
    for text in (crop_description, target_description or ""):
        for label in sorted(CLASS_LABELS, key=len, reverse=True):
            if label in text:
                return label
    return "car"


def build_app(suite: dict | None = None, persist_dir: str | None = None,
              iou_threshold: float = 0.5) -> FastAPI:
    suite = suite or default_backend_suite()
    # captioner and generator may wrap stateful models; serialize them
    captioner = SerializedBackend(suite["captioner"])
    generator = SerializedBackend(suite["generator"])
    provider = suite["embedding"]
    depth_backend = suite["depth"]
    store = SessionStore(persist_dir)
    app = FastAPI(title="driveedit session service")
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.store = store

    @app.exception_handler(ApiError)
    def _api_error(request: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    def _validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "invalid_request",
                                     "message": str(exc.errors())})

    def _session(session_id: str) -> EditSession:
        try:
            return store.get(session_id)
        except SessionNotFound:
            raise ApiError(404, "unknown_session",
                           f"no session {session_id!r}")

    def _session_mask(session: EditSession):
        h, w = session.image.shape[:2]
        return build_langmask(session.specs, h, w, provider)

    @app.get("/banks")
    def banks():
        return {
            "actions": list(ACTIONS),
            "classes": sorted(CLASS_LABELS),
            "vehicle_colors": list(DEFAULT_BANKS.vehicle_colors),
            "vehicle_objects": list(DEFAULT_BANKS.vehicle_objects),
            "pedestrian_adjectives": list(DEFAULT_BANKS.pedestrian_adjectives),
            "pedestrian_articles": list(DEFAULT_BANKS.pedestrian_articles),
            "pedestrian_ages": list(DEFAULT_BANKS.pedestrian_ages),
            "traffic_light_colors": list(DEFAULT_BANKS.traffic_light_colors),
            "global_attributes": {k: list(v)
                                  for k, v in GLOBAL_ATTRIBUTE_VALUES.items()},
        }

    @app.post("/sessions", status_code=201)
    async def create_session(request: Request):
        body = await request.body()
        img = _decode_upload(body, request.headers.get("content-type", ""))
        try:
            annotation = descriptor.annotate(
                img, descriptor_backends(suite),
                prompt=descriptor.load_vlm_prompt(suite.get("prompt_path")))
        except Exception as e:
            raise ApiError(502, "backend_error", f"annotation failed: {e}")
        session = store.create(img, annotation)
        return session.snapshot()

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return _session(session_id).snapshot()

    @app.post("/sessions/{session_id}/edits", status_code=201)
    async def add_edit(session_id: str, request: Request):
        payload = await request.json()
        session = _session(session_id)
        action = payload.get("action")
        if action not in ACTIONS:
            raise ApiError(400, "invalid_action",
                           f"action must be one of {ACTIONS}")
        try:
            bbox = tuple(int(v) for v in payload["bbox"])
        except (KeyError, TypeError, ValueError):
            raise ApiError(400, "invalid_bbox", "bbox must be [x0, y0, x1, y1]")
        h, w = session.image.shape[:2]
        x0, y0, x1, y1 = bbox if len(bbox) == 4 else (0, 0, 0, 0)
        if not (0 <= x0 < x1 <= w and 0 <= y0 < y1 <= h):
            raise ApiError(400, "invalid_bbox",
                           f"bbox {bbox} outside {w}x{h} or degenerate")
        target = payload.get("target_description") or None
        if action == "delete" and target:
            raise ApiError(400, "invalid_target",
                           "delete edits take no target description")
        if action in ("modify", "replace", "insert") and not target:
            raise ApiError(400, "missing_target",
                           f"{action} edits require a target description")

        best, best_iou = None, 0.0
        for inst in session.annotation.instances:
            v = _iou(bbox, inst.bbox)
            if v > best_iou:
                best, best_iou = inst, v
        if best is not None and best_iou >= iou_threshold:
            subject = best.attributes.get("description") or best.class_label
            subject_class = best.class_label
            distance = best.distance_m
        else:
            crop_img = session.image[y0:y1, x0:x1]
            if action == "insert":
                subject = target  # nothing to describe in an empty region
                subject_class = _guess_class(target, "")
            else:
                try:
                    attrs = captioner.instance_record(crop_img, "car")
                except BackendError as e:
                    raise ApiError(502, "backend_error", str(e))
                subject = attrs.get("description", "object")
                subject_class = _guess_class(target, subject)
            try:
                depth = np.asarray(depth_backend.depth(session.image))
                distance = max(float(depth[y0:y1, x0:x1].mean()),
                               _MIN_DISTANCE_M)
            except BackendError:
                distance = 10.0
        sentence = build_sentence(action, subject,
                                  target if action != "delete" else None)
        try:
            spec = EditSpec(action=action, subject_class=subject_class,
                            bbox=bbox, distance_m=distance,
                            instruction_sentence=sentence,
                            target_description=target if action != "delete"
                            else None)
        except ValueError as e:
            raise ApiError(400, "invalid_spec", str(e))
        with session.lock:
            session.specs.append(spec)
            store.note_specs_changed(session)
            index = len(session.specs) - 1
        return {"index": index, "spec": spec_to_dict(spec),
                "instruction_sentence": sentence, "matched_instance":
                    best.instance_id if best is not None
                    and best_iou >= iou_threshold else None}

    @app.get("/sessions/{session_id}/mask")
    def get_mask(session_id: str):
        session = _session(session_id)
        with session.lock:
            mask = _session_mask(session)
        return Response(content=mask_to_bytes(mask),
                        media_type="application/octet-stream")

    @app.get("/sessions/{session_id}/mask.png")
    def get_mask_png(session_id: str):
        session = _session(session_id)
        with session.lock:
            mask = _session_mask(session)
        return Response(content=encode_gray_png(project_binary(mask)),
                        media_type="image/png")

    @app.post("/sessions/{session_id}/render")
    async def render(session_id: str, request: Request):
        body = await request.body()
        prompt = ""
        if body:
            import json
            try:
                prompt = json.loads(body).get("global_prompt", "")
            except ValueError:
                raise ApiError(400, "invalid_request",
                               "render body must be JSON")
        session = _session(session_id)
        with session.lock:
            mask = _session_mask(session)
            try:
                preview = as_float_image(
                    generator.edit(session.image, prompt, mask))
            except Exception as e:
                raise ApiError(502, "backend_error", f"render failed: {e}")
            if preview.shape != session.image.shape:
                raise ApiError(502, "backend_error",
                               "editing backend changed image dims")
            length = store.record_render(session, mask, preview, prompt)
        return {"history_length": length,
                "preview_png_b64":
                    base64.b64encode(encode_png(preview)).decode("ascii")}

    return app


def main(argv=None) -> None:
    """Entry point for ``driveedit serve``; also usable standalone."""
    import argparse

    import uvicorn

    from ..backends import load_backend_config

    parser = argparse.ArgumentParser(description="edit-session service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8008)
    parser.add_argument("--backends", default=None,
                        help="backend config JSON path")
    parser.add_argument("--persist-dir", default=None)
    args = parser.parse_args(argv)
    suite = load_backend_config(args.backends) if args.backends else None
    uvicorn.run(build_app(suite, args.persist_dir),
                host=args.host, port=args.port)


if __name__ == "__main__":
    main()
