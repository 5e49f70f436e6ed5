"""Embedding Analysis Package"""

from .modes import CaptionModes, assign_caption_modes
from .projection import Projection, pca_project, project_embeddings, write_projection_csv, write_scatter_svg

__all__ = [
    "CaptionModes",
    "assign_caption_modes",
    "Projection",
    "pca_project",
    "project_embeddings",
    "write_projection_csv",
    "write_scatter_svg",
]
