"""HTTP facade over the core package: ``uvicorn pdoa.service:app``."""

from .app import app

__all__ = ["app"]
