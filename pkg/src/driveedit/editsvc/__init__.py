"""Interactive edit-session HTTP service."""
from .app import ApiError, build_app
from .sessions import EditSession, SessionNotFound, SessionStore

__all__ = ["ApiError", "build_app", "EditSession", "SessionNotFound",
           "SessionStore"]
