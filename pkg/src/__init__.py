"""Conformance Forge - protocol specification to conformance test pipeline."""

import os
import subprocess

__version__ = "0.4.0"


def _git(*args: str) -> str:
    """Output of a git command run in the package directory, or "unknown"."""
    try:
        result = subprocess.run(
            ["git", *args],
            cwd=os.path.dirname(os.path.abspath(__file__)),
            capture_output=True,
            text=True,
            timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return result.stdout.strip() if result.returncode == 0 and result.stdout.strip() else "unknown"


__revision__ = _git("rev-parse", "--short", "HEAD")
__build_date__ = _git("log", "-1", "--format=%cd", "--date=short")


def version_string() -> str:
    """Version line shown by ``--version`` and in the log banner."""
    if __revision__ == "unknown":
        return f"conformance-forge {__version__}"
    return f"conformance-forge {__version__} ({__revision__}, {__build_date__})"
