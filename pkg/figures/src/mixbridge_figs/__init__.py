"""Figure rendering for mixbridge artifact trees."""

from .artifacts import MissingArtifact, SchemaMismatch
from .render import FIGURES, FigureSpec, render

__all__ = ["FIGURES", "FigureSpec", "MissingArtifact", "SchemaMismatch", "render"]

__version__ = "0.1.0"
