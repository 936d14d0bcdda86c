"""Loading of the versioned prompt templates bundled with the package."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    """Read `prompts/<name>.txt` from the package data."""
    ref = resources.files("fsgraph").joinpath("prompts", f"{name}.txt")
    return ref.read_text(encoding="utf-8")


def render(name: str, **fields: str) -> str:
    return load_template(name).format(**fields)
