"""Shared fixtures: a toy model configuration and a tiny synthetic corpus."""

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent.parent))

from dml_captioning.src.data.corpus import generate_corpus, write_corpus
from dml_captioning.src.data.dataset import encode_scenes
from dml_captioning.src.model.config import ModelConfig
from dml_captioning.src.model.dml import DMLModel
from dml_captioning.src.training.trainer import TrainConfig


@pytest.fixture
def toy_config():
    """d_model 8, one layer per stack, 4 codebook entries."""
    return ModelConfig(
        vocab_size=12,
        d_model=8,
        n_heads=2,
        d_ff=16,
        max_len=10,
        d_img=6,
        k=4,
    )


@pytest.fixture
def toy_model(toy_config):
    return DMLModel(toy_config, seed=0)


@pytest.fixture
def tiny_corpus():
    return generate_corpus(n_images=12, n_caps_per_image=3, n_families=4, d_img=8, n_regions=4, seed=0)


@pytest.fixture
def tiny_data_dir(tmp_path, tiny_corpus):
    """Corpus files on disk: train/val/test JSONL plus vocab.json."""
    out = tmp_path / "data"
    write_corpus(tiny_corpus, out)
    return out


@pytest.fixture
def tiny_training(tiny_corpus):
    """Encoded training scenes, vocabulary and matching model/train configs."""
    vocab = tiny_corpus.build_vocab()
    scenes = encode_scenes(tiny_corpus.train, vocab)
    model_cfg = ModelConfig(
        vocab_size=len(vocab),
        d_model=8,
        n_heads=2,
        d_ff=16,
        max_len=20,
        d_img=8,
        k=4,
    )
    train_cfg = TrainConfig(
        total_steps=6,
        images_per_batch=2,
        learning_rate=1e-2,
        warmup_steps=2,
        usage_every=2,
        log_every=0,
    )
    return scenes, vocab, model_cfg, train_cfg
