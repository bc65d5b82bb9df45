"""Render publication figures from zeno-nh run directories."""

__version__ = "0.1.0"

from .render import FigureSpec, MissingColumnError, render

__all__ = ["FigureSpec", "MissingColumnError", "render", "__version__"]
