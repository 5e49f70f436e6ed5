"""Checkpoint directories: `manifest.json` plus a raw `tensors.bin` blob."""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np

from ..autograd.serialization import pack_tensors, unpack_tensors, write_bytes, write_json
from ..data.vocab import Vocabulary
from ..errors import CheckpointError, ConfigError
from ..model.config import ModelConfig
from ..model.dml import DMLModel
from .optimizer import STATE_PREFIX, AdamW

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"
BLOB = "tensors.bin"


@dataclass
class Checkpoint:
    path: Path
    manifest: Dict[str, Any]
    arrays: Dict[str, np.ndarray]

    @property
    def step(self) -> int:
        return int(self.manifest["step"])

    @property
    def config(self) -> Dict[str, Any]:
        return self.manifest["config"]

    @property
    def metrics(self) -> Dict[str, Any]:
        return self.manifest.get("metrics", {})

    @property
    def usage_counts(self) -> np.ndarray:
        return np.asarray(self.manifest["usage_counts"], dtype=np.int64)

    @property
    def vocab(self) -> Optional[Vocabulary]:
        payload = self.manifest.get("vocab")
        return None if payload is None else Vocabulary.from_json(payload)

    @property
    def model_config(self) -> ModelConfig:
        try:
            return ModelConfig(**self.config["model"])
        except (KeyError, TypeError, ConfigError) as e:
            raise CheckpointError(f"checkpoint {self.path} has an unusable model config: {e}") from e

    @property
    def seed(self) -> int:
        return int(self.config.get("train", {}).get("seed", 0))


def save_checkpoint(
    path: Path,
    model: DMLModel,
    optimizer: Optional[AdamW],
    step: int,
    config: Dict[str, Any],
    metrics: Optional[Dict[str, Any]] = None,
    vocab: Optional[Vocabulary] = None,
) -> Path:
    """Write a checkpoint directory. Identical state always yields identical bytes."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CheckpointError(f"cannot create checkpoint directory {path}: {e}") from e

    arrays = model.store.arrays()
    if optimizer is not None:
        arrays.update(optimizer.state_arrays())
    blob, index = pack_tensors(arrays)
    write_bytes(path / BLOB, blob)
    manifest = {
        "format_version": FORMAT_VERSION,
        "config": config,
        "step": int(step),
        "metrics": metrics or {},
        "usage_counts": [int(c) for c in model.codebook.usage_counts],
        "vocab": None if vocab is None else vocab.to_json(),
        "optimizer_t": None if optimizer is None else optimizer.t,
        "tensors": index,
    }
    write_json(path / MANIFEST, manifest)
    logger.info("saved checkpoint at step %d to %s", step, path)
    return path


def load_checkpoint(path: Path) -> Checkpoint:
    path = Path(path)
    try:
        manifest = json.loads((path / MANIFEST).read_text(encoding="utf-8"))
        blob = (path / BLOB).read_bytes()
    except FileNotFoundError as e:
        raise CheckpointError(f"not a checkpoint directory: {path}") from e
    except (OSError, json.JSONDecodeError) as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint format version {version} is not supported (expected {FORMAT_VERSION})"
        )
    for key in ("config", "step", "usage_counts", "tensors"):
        if key not in manifest:
            raise CheckpointError(f"checkpoint manifest is missing '{key}'")
    return Checkpoint(path=path, manifest=manifest, arrays=unpack_tensors(blob, manifest["tensors"]))


def restore_model(checkpoint: Checkpoint) -> DMLModel:
    """Rebuild the model a checkpoint was saved from, with its weights and usage counts."""
    model = DMLModel(checkpoint.model_config, checkpoint.seed)
    params = {n: a for n, a in checkpoint.arrays.items() if not n.startswith(f"{STATE_PREFIX}.")}
    model.store.load_arrays(params)
    counts = checkpoint.usage_counts
    if counts.shape != model.codebook.usage_counts.shape:
        raise CheckpointError(f"usage counts of length {counts.shape[0]} do not match k={model.cfg.k}")
    model.codebook.usage_counts[...] = counts
    return model


def restore_optimizer(checkpoint: Checkpoint, optimizer: AdamW) -> None:
    t = checkpoint.manifest.get("optimizer_t")
    if t is None:
        raise CheckpointError(f"checkpoint {checkpoint.path} carries no optimizer state")
    optimizer.load_state(checkpoint.arrays, int(t))
