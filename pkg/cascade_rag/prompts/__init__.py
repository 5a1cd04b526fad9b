"""Prompt templates shipped as package data."""
from __future__ import annotations

from functools import lru_cache
from importlib.resources import files


@lru_cache(maxsize=None)
def load(name: str) -> str:
    """Return the template ``<name>.txt`` without its trailing newline."""
    return files(__name__).joinpath(f"{name}.txt").read_text(encoding="utf-8").rstrip("\n")


ROUTE_MARKER = "Available namespaces:"
CONTEXT_MARKER = "Context:\n"
QUESTION_MARKER = "\n\nQuestion:\n"
