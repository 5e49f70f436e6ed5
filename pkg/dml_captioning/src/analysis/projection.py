"""2-D PCA of codebook entries and caption embeddings in one shared basis."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from sklearn.decomposition import PCA  # noqa: E402

from ..errors import DataError  # noqa: E402

logger = logging.getLogger(__name__)

COLUMNS = ["kind", "mode_index", "x", "y"]

matplotlib.rcParams["svg.hashsalt"] = "dml-projection"


@dataclass
class Projection:
    frame: pd.DataFrame
    explained_variance: List[float]


def pca_project(points: np.ndarray, n_components: int = 2) -> Tuple[np.ndarray, np.ndarray]:
    """Coordinates and components; each component's largest-magnitude entry is made positive."""
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise DataError("projection needs a non-empty point matrix")
    usable = min(n_components, points.shape[0], points.shape[1])
    pca = PCA(n_components=usable, svd_solver="full").fit(points)
    components = pca.components_.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    coords = (points - pca.mean_) @ components.T
    if usable < n_components:
        coords = np.hstack([coords, np.zeros((coords.shape[0], n_components - usable))])
    return coords, components


def project_embeddings(
    entries: np.ndarray,
    active_modes: Sequence[int],
    caption_embeddings: np.ndarray,
    caption_modes: Sequence[int],
) -> Projection:
    """Fit one basis on the active codebook rows plus caption embeddings; unused modes are left out."""
    active = [int(m) for m in active_modes]
    mode_points = np.asarray(entries)[active] if active else np.zeros((0, np.asarray(entries).shape[1]))
    caption_points = np.asarray(caption_embeddings).reshape(len(caption_modes), -1)
    stacked = np.vstack([mode_points, caption_points])
    coords, _ = pca_project(stacked)
    total_var = float(np.var(stacked, axis=0).sum()) or 1.0
    explained = [float(np.var(coords[:, i]) / total_var) for i in range(coords.shape[1])]
    frame = pd.DataFrame(
        {
            "kind": ["mode"] * len(active) + ["caption"] * len(caption_modes),
            "mode_index": active + [int(m) for m in caption_modes],
            "x": coords[:, 0],
            "y": coords[:, 1],
        },
        columns=COLUMNS,
    )
    return Projection(frame=frame, explained_variance=explained)


def write_projection_csv(projection: Projection, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    projection.frame.to_csv(path, index=False, float_format="%.10g")
    return path


def write_scatter_svg(projection: Projection, path: Path, title: str = "Mode embeddings") -> Path:
    """Captions colored by assigned mode, mode embeddings drawn as labeled stars."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = projection.frame
    captions = frame[frame["kind"] == "caption"]
    modes = frame[frame["kind"] == "mode"]

    fig, ax = plt.subplots(figsize=(7, 6))
    cmap = plt.get_cmap("tab20")
    for i, (mode, group) in enumerate(captions.groupby("mode_index", sort=True)):
        ax.scatter(group["x"], group["y"], s=8, alpha=0.5, color=cmap(i % 20), label=f"mode {mode}")
    ax.scatter(modes["x"], modes["y"], marker="*", s=160, color="black", edgecolors="white")
    for _, row in modes.iterrows():
        ax.annotate(str(row["mode_index"]), (row["x"], row["y"]), xytext=(4, 4), textcoords="offset points")
    ax.set_xlabel("PC1")
    ax.set_ylabel("PC2")
    ax.set_title(title)
    if len(captions):
        ax.legend(fontsize=7, loc="best", markerscale=2)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
