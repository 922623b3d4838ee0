"""HTTP service wrapping the coordination package."""

from .app import app

__all__ = ["app"]
