"""Bundled data files: heuristics, prompt templates, grammar and registries."""

import os

DATA_DIR = os.path.dirname(os.path.abspath(__file__))


def data_path(*parts: str) -> str:
    """Absolute path of a bundled data file."""
    return os.path.join(DATA_DIR, *parts)
