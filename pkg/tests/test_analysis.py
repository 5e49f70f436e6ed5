"""Tests for mode-embedding projection and caption mode assignment."""

import sys
from dataclasses import replace
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from dml_captioning.src.analysis.modes import assign_caption_modes
from dml_captioning.src.analysis.projection import (
    COLUMNS,
    pca_project,
    project_embeddings,
    write_projection_csv,
    write_scatter_svg,
)
from dml_captioning.src.errors import DataError
from dml_captioning.src.model.dml import DMLModel


class TestProjection:
    """Test the shared 2-D PCA basis."""

    def test_hand_example(self):
        """Centered points along the axes project onto themselves."""
        points = np.array([[2.0, 1.0, 0.0], [-2.0, 1.0, 0.0], [0.0, -2.0, 0.0]])
        coords, components = pca_project(points)
        np.testing.assert_allclose(coords, [[2.0, 1.0], [-2.0, 1.0], [0.0, -2.0]], atol=1e-12)
        np.testing.assert_allclose(np.abs(components[:, :2]), np.eye(2), atol=1e-12)

    def test_sign_convention(self):
        """Each component's largest entry is positive."""
        rng = np.random.default_rng(0)
        _, components = pca_project(rng.normal(size=(20, 5)))
        for row in components:
            assert row[np.argmax(np.abs(row))] > 0

    def test_degenerate_inputs(self):
        """One-dimensional points pad with a zero column; empty input is rejected."""
        coords, _ = pca_project(np.array([[1.0], [2.0], [4.0]]))
        assert coords.shape == (3, 2)
        np.testing.assert_array_equal(coords[:, 1], 0.0)
        with pytest.raises(DataError):
            pca_project(np.zeros((0, 3)))

    def test_shared_basis_frame(self):
        """Active modes come first, then captions, in one coordinate system."""
        rng = np.random.default_rng(1)
        entries = rng.normal(size=(5, 4))
        captions = rng.normal(size=(6, 4))
        projection = project_embeddings(entries, [1, 3], captions, [1, 1, 3, 3, 1, 3])
        frame = projection.frame
        assert list(frame.columns) == COLUMNS
        assert list(frame["kind"]) == ["mode"] * 2 + ["caption"] * 6
        assert list(frame["mode_index"][:2]) == [1, 3]

        coords, _ = pca_project(np.vstack([entries[[1, 3]], captions]))
        np.testing.assert_allclose(frame[["x", "y"]].to_numpy(), coords, atol=1e-12)
        assert 0.0 < sum(projection.explained_variance) <= 1.0 + 1e-9

    def test_writers(self, tmp_path):
        """CSV has the fixed columns and the SVG is a vector image."""
        rng = np.random.default_rng(2)
        projection = project_embeddings(rng.normal(size=(3, 4)), [0, 2], rng.normal(size=(4, 4)), [0, 0, 2, 2])
        csv_path = write_projection_csv(projection, tmp_path / "out" / "projection.csv")
        loaded = pd.read_csv(csv_path)
        assert list(loaded.columns) == COLUMNS
        assert len(loaded) == 6
        svg_path = write_scatter_svg(projection, tmp_path / "out" / "projection.svg")
        assert svg_path.read_text().lstrip().startswith("<?xml")


class TestCaptionModes:
    """Test reference-caption mode assignment."""

    def test_assign_caption_modes(self, tiny_corpus, tiny_training):
        """Every caption gets a mode, injective within an image, with its family label."""
        _, vocab, model_cfg, _ = tiny_training
        model = DMLModel(model_cfg, seed=0)
        scenes = tiny_corpus.train[:4]
        result = assign_caption_modes(scenes, model, vocab)
        assert len(result) == sum(len(s.captions) for s in scenes)
        assert result.embeddings.shape == (len(result), model_cfg.d_model)
        assert result.labels == [label for s in scenes for label in s.mode_labels]
        for image_id in {s.image_id for s in scenes}:
            modes = [m for i, m in zip(result.image_ids, result.modes) if i == image_id]
            assert len(set(modes)) == len(modes)
            assert all(0 <= m < model_cfg.k for m in modes)

    def test_nearest_strategy_and_no_labels(self, tiny_corpus, tiny_training):
        """The nearest strategy may collide; unlabeled scenes give no labels."""
        _, vocab, model_cfg, _ = tiny_training
        model = DMLModel(model_cfg, seed=0)
        scenes = [replace(s, mode_labels=None) for s in tiny_corpus.train[:2]]
        result = assign_caption_modes(scenes, model, vocab, strategy="nearest")
        assert result.labels is None
        assert len(result.modes) == sum(len(s.captions) for s in scenes)


if __name__ == "__main__":
    pytest.main([__file__])
