"""Semi-analytic solver and verification lab for space-time fractional wave equations."""

from __future__ import annotations

from importlib import metadata

try:
    __version__ = metadata.version("artifact")
except metadata.PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = ["__version__"]
