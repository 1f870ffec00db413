"""FastAPI wrapper around the solver library."""

from .app import create_app
from .models import ErrorModel

__all__ = ["create_app", "ErrorModel"]
