"""In-memory edit-session store with per-session serialization.

Each session owns a base image, its annotation, the ordered edit specs,
and an append-only history of (mask, preview) renders. Operations that
mutate a session run under that session's lock, so concurrent requests
against different sessions proceed in parallel while a single session
never interleaves.
"""
from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field

import numpy as np

from ..core.images import save_image
from ..core.serialization import serialize_mask
from ..core.types import (EditSpec, LangMask, SceneAnnotation,
                          annotation_to_dict, spec_to_dict)


@dataclass
class EditSession:
    session_id: str
    image: np.ndarray
    annotation: SceneAnnotation
    specs: list[EditSpec] = field(default_factory=list)
    history: list[dict] = field(default_factory=list)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "annotation": annotation_to_dict(self.annotation),
            "specs": [spec_to_dict(s) for s in self.specs],
            "history_length": len(self.history),
        }


class SessionNotFound(KeyError):
    pass


class SessionStore:
    def __init__(self, persist_dir: str | None = None):
        self._sessions: dict[str, EditSession] = {}
        self._table_lock = threading.Lock()
        self.persist_dir = persist_dir
        if persist_dir:
            os.makedirs(persist_dir, exist_ok=True)

    def create(self, image: np.ndarray, annotation: SceneAnnotation) -> EditSession:
        session = EditSession(session_id=uuid.uuid4().hex, image=image,
                              annotation=annotation)
        with self._table_lock:
            self._sessions[session.session_id] = session
        self._persist(session)
        return session

    def get(self, session_id: str) -> EditSession:
        with self._table_lock:
            try:
                return self._sessions[session_id]
            except KeyError:
                raise SessionNotFound(session_id) from None

    def ids(self) -> list[str]:
        with self._table_lock:
            return list(self._sessions)

    def _persist(self, session: EditSession) -> None:
        if not self.persist_dir:
            return
        d = os.path.join(self.persist_dir, session.session_id)
        os.makedirs(d, exist_ok=True)
        image_path = os.path.join(d, "image.npy")
        if not os.path.exists(image_path):
            save_image(session.image, image_path)
        with open(os.path.join(d, "session.json"), "w", encoding="utf-8") as f:
            json.dump(session.snapshot(), f, ensure_ascii=False, indent=2)

    def record_render(self, session: EditSession, mask: LangMask,
                      preview: np.ndarray, prompt: str) -> int:
        """Append one (mask, preview) render; returns the new history length.

        Callers must hold the session lock.
        """
        index = len(session.history)
        session.history.append({"mask": mask, "preview": preview,
                                "prompt": prompt})
        if self.persist_dir:
            d = os.path.join(self.persist_dir, session.session_id)
            os.makedirs(d, exist_ok=True)
            save_image(preview, os.path.join(d, f"preview_{index:03d}.npy"))
            serialize_mask(mask, os.path.join(d, f"mask_{index:03d}.lmsk"))
        self._persist(session)
        return len(session.history)

    def note_specs_changed(self, session: EditSession) -> None:
        self._persist(session)
