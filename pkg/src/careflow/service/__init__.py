"""HTTP service wrapping the allocation engine."""

from .app import create_app

__all__ = ["create_app"]
