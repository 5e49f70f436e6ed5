"""Desk-scale mode recovery runs on the default synthetic corpus.

These train several full desk-preset models, about five minutes each on one core;
they only run with DML_RUN_SLOW=1.
"""

import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from dml_captioning.src.analysis.modes import assign_caption_modes
from dml_captioning.src.config import build_run_config
from dml_captioning.src.data.corpus import classify_caption, generate_corpus
from dml_captioning.src.data.dataset import encode_scenes
from dml_captioning.src.metrics.purity import mode_purity
from dml_captioning.src.metrics.report import build_report
from dml_captioning.src.model.mic import DecodeSpec, generate_all_modes
from dml_captioning.src.training.checkpoint import load_checkpoint, restore_model
from dml_captioning.src.training.trainer import FINAL_DIR, TRAIN_LOG, run_training

pytestmark = [
    pytest.mark.slow,
    pytest.mark.skipif(os.getenv("DML_RUN_SLOW") != "1", reason="set DML_RUN_SLOW=1 to run desk-scale training"),
]


@pytest.fixture(scope="module")
def desk_corpus():
    corpus = generate_corpus(seed=0)
    vocab = corpus.build_vocab()
    return corpus, vocab, encode_scenes(corpus.train, vocab)


@pytest.fixture(scope="module")
def desk_runs(tmp_path_factory, desk_corpus):
    """Train each variant once on demand; results are cached per module."""
    corpus, vocab, scenes = desk_corpus
    root = tmp_path_factory.mktemp("desk")
    cache = {}

    def train(name, **overrides):
        if name not in cache:
            config = build_run_config(preset="desk", overrides=overrides)
            model_cfg = config.model.with_updates(vocab_size=len(vocab))
            result = run_training(scenes, model_cfg, config.train, root / name, vocab, config.checkpoint_extras())
            cache[name] = (result, restore_model(load_checkpoint(result.checkpoint)))
        return cache[name]

    return train


def _generate(model, corpus, vocab):
    spec = DecodeSpec.parse("greedy")
    records = []
    for scene in corpus.test:
        for caption in generate_all_modes(scene.features, model.codebook, model, spec):
            records.append(caption.to_record(scene.image_id, vocab))
    references = {s.image_id: list(s.captions) for s in corpus.test}
    return records, references


class TestModeRecovery:
    """Test that the learned codebook recovers the template families."""

    def test_hungarian_uses_many_modes(self, desk_runs):
        """Hungarian assignment with full masking activates at least eight modes."""
        result, _ = desk_runs("hungarian")
        assert result.usage["effective_modes"] >= 8

    def test_nearest_uses_fewer_modes(self, desk_runs):
        """Independent nearest lookup collapses onto fewer modes."""
        hungarian, _ = desk_runs("hungarian")
        nearest, _ = desk_runs("nearest", **{"model.assignment": "nearest"})
        assert nearest.usage["effective_modes"] < hungarian.usage["effective_modes"]

    def test_unmasked_reconstruction_uses_fewer_modes(self, desk_runs):
        """Without masking the decoder copies the caption and needs fewer modes."""
        unmasked, _ = desk_runs("mask0", **{"train.masking": "fixed:0.0"})
        masked, _ = desk_runs("mask1", **{"train.masking": "fixed:1.0"})
        assert unmasked.usage["effective_modes"] < masked.usage["effective_modes"]

    def test_mode_purity(self, desk_runs, desk_corpus):
        """Reference captions of one family share a mode."""
        corpus, vocab, _ = desk_corpus
        _, model = desk_runs("hungarian")
        assigned = assign_caption_modes(corpus.test, model, vocab)
        assert mode_purity(assigned.modes, assigned.labels).purity >= 0.7

    def test_training_loss_decreases(self, desk_runs):
        """Teacher-forced loss falls over the first 200 steps."""
        result, _ = desk_runs("hungarian")
        losses = [json.loads(line)["mic_loss"] for line in result.log_path.read_text().splitlines()]
        assert np.mean(losses[180:200]) < np.mean(losses[:20])


class TestControllability:
    """Test mode-controlled generation on the trained model."""

    def test_modes_change_surface_pattern(self, desk_runs, desk_corpus):
        """The two most used modes produce different families on most images."""
        corpus, vocab, _ = desk_corpus
        _, model = desk_runs("hungarian")
        first, second = np.argsort(-model.codebook.usage_counts, kind="stable")[:2]
        spec = DecodeSpec.parse("greedy")
        differing = 0
        for scene in corpus.test:
            captions = generate_all_modes(scene.features, model.codebook, model, spec, [int(first), int(second)])
            families = [classify_caption(c.text(vocab), corpus.grammar) for c in captions]
            differing += families[0] != families[1]
        assert differing >= 0.5 * len(corpus.test)

    def test_oracle_beats_baseline(self, desk_runs, desk_corpus):
        """Oracle CIDEr-D over modes dominates every mode and beats the no-mode captioner."""
        corpus, vocab, _ = desk_corpus
        _, model = desk_runs("hungarian")
        records, references = _generate(model, corpus, vocab)
        report = build_report(records, references)
        best_mode = max(scores["cider_d"] for scores in report.per_mode.values())
        assert report.oracle["cider_d"] >= best_mode

        _, baseline = desk_runs("baseline", **{"model.use_modes": False})
        base_records, _ = _generate(baseline, corpus, vocab)
        base_report = build_report(base_records, references)
        assert report.oracle["cider_d"] >= 1.1 * base_report.corpus["cider_d"]


class TestDeskDeterminism:
    """Test bit-identical desk runs."""

    def test_repeat_run_is_identical(self, desk_runs):
        """A second run with the same seed writes the same checkpoint bytes."""
        first, _ = desk_runs("hungarian")
        second, _ = desk_runs("hungarian-repeat")
        for filename in ("tensors.bin", "manifest.json"):
            assert (first.checkpoint / filename).read_bytes() == (second.checkpoint / filename).read_bytes()
        assert first.log_path.name == second.log_path.name == TRAIN_LOG
        assert first.checkpoint.name == FINAL_DIR

    def test_resume_matches(self, desk_runs, desk_corpus, tmp_path):
        """Resuming from the step-500 checkpoint reproduces the final state."""
        _, vocab, scenes = desk_corpus
        first, _ = desk_runs("hungarian")
        config = build_run_config(preset="desk")
        model_cfg = config.model.with_updates(vocab_size=len(vocab))
        resumed = run_training(
            scenes,
            model_cfg,
            config.train,
            tmp_path,
            vocab,
            config.checkpoint_extras(),
            resume=first.checkpoint.parent / "step-500",
        )
        assert (resumed.checkpoint / "tensors.bin").read_bytes() == (first.checkpoint / "tensors.bin").read_bytes()


if __name__ == "__main__":
    pytest.main([__file__])
