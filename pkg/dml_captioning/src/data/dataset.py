"""Dataset JSONL ingestion and the trainer's label-free view of a scene."""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError
from ..utils import write_jsonl
from .vocab import MAX_CAPTION_TOKENS, Vocabulary

logger = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
REQUIRED_KEYS = ("image_id", "features", "captions")


def _is_label(value: Any) -> bool:
    # bool is an int subclass
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


@dataclass(frozen=True)
class TrainingScene:
    """What the trainer sees of an image: features and encoded captions, never labels."""

    image_id: str
    features: np.ndarray
    captions: Tuple[Tuple[int, ...], ...]

    @property
    def n_captions(self) -> int:
        return len(self.captions)


@dataclass
class SceneInstance:
    image_id: str
    features: np.ndarray
    captions: List[str]
    mode_labels: Optional[List[int]] = field(default=None)

    @property
    def n_regions(self) -> int:
        return int(self.features.shape[0])

    @property
    def d_img(self) -> int:
        return int(self.features.shape[1])

    def validate(self, line: Optional[int] = None) -> None:
        if self.features.ndim != 2 or self.features.shape[0] < 1 or self.features.shape[1] < 1:
            raise DataError(f"{self.image_id}: features must be a non-empty [r x d_img] matrix", line)
        if not np.all(np.isfinite(self.features)):
            raise DataError(f"{self.image_id}: features contain non-finite values", line)
        if not self.captions:
            raise DataError(f"{self.image_id}: at least one caption is required", line)
        for caption in self.captions:
            if not isinstance(caption, str) or not caption.strip():
                raise DataError(f"{self.image_id}: captions must be non-empty strings", line)
        if self.mode_labels is not None and len(self.mode_labels) != len(self.captions):
            raise DataError(
                f"{self.image_id}: {len(self.mode_labels)} mode labels for {len(self.captions)} captions",
                line,
            )
        if self.mode_labels is not None and not all(_is_label(m) for m in self.mode_labels):
            raise DataError(f"{self.image_id}: mode labels must be integers", line)

    def training_view(self, vocab: Vocabulary, max_tokens: int = MAX_CAPTION_TOKENS) -> TrainingScene:
        encoded = []
        for caption in self.captions:
            ids = vocab.encode(caption, max_tokens)
            if not ids:
                raise DataError(f"{self.image_id}: caption '{caption}' has no tokens")
            encoded.append(tuple(ids))
        return TrainingScene(self.image_id, self.features, tuple(encoded))

    def to_json(self) -> Dict[str, Any]:
        payload: Dict[str, Any] = {
            "image_id": self.image_id,
            "features": self.features.tolist(),
            "captions": list(self.captions),
        }
        if self.mode_labels is not None:
            payload["mode_labels"] = [int(m) for m in self.mode_labels]
        return payload

    @classmethod
    def from_json(cls, payload: Any, line: Optional[int] = None) -> "SceneInstance":
        if not isinstance(payload, dict):
            raise DataError("expected a JSON object", line)
        for key in REQUIRED_KEYS:
            if key not in payload:
                raise DataError(f"missing required key '{key}'", line)
        if not isinstance(payload["captions"], list):
            raise DataError("'captions' must be a list of strings", line)
        try:
            features = np.asarray(payload["features"], dtype=np.float64)
        except (TypeError, ValueError) as e:
            raise DataError(f"'features' is not a rectangular numeric matrix: {e}", line) from e
        labels = payload.get("mode_labels")
        if labels is not None and not isinstance(labels, list):
            raise DataError("'mode_labels' must be a list of integers", line)
        scene = cls(
            image_id=str(payload["image_id"]),
            features=features,
            captions=list(payload["captions"]),
            mode_labels=None if labels is None else list(labels),
        )
        scene.validate(line)
        return scene


def load_dataset(path: Path, d_img: Optional[int] = None) -> List[SceneInstance]:
    """Read and validate a dataset JSONL file.

    Every error names the offending line. All scenes must share one feature
    dimension, which must equal `d_img` when given.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"dataset file not found: {path}")
    scenes: List[SceneInstance] = []
    seen: Dict[str, int] = {}
    with path.open("r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            if not raw.strip():
                continue
            try:
                payload = json.loads(raw)
            except json.JSONDecodeError as e:
                raise DataError(f"invalid JSON: {e.msg}", lineno) from e
            scene = SceneInstance.from_json(payload, lineno)
            expected = d_img if d_img is not None else (scenes[0].d_img if scenes else None)
            if expected is not None and scene.d_img != expected:
                raise DataError(f"feature dimension {scene.d_img} does not match {expected}", lineno)
            if scene.image_id in seen:
                raise DataError(f"duplicate image_id '{scene.image_id}' (first on line {seen[scene.image_id]})", lineno)
            seen[scene.image_id] = lineno
            scenes.append(scene)
    if not scenes:
        raise DataError(f"dataset {path} is empty")
    logger.info("loaded %d scenes from %s", len(scenes), path)
    return scenes


def write_dataset(path: Path, scenes: Iterable[SceneInstance]) -> int:
    return write_jsonl(path, (s.to_json() for s in scenes))


def load_split(data_dir: Path, split: str, d_img: Optional[int] = None) -> List[SceneInstance]:
    if split not in SPLITS:
        raise DataError(f"unknown split '{split}'")
    return load_dataset(Path(data_dir) / f"{split}.jsonl", d_img)


def check_vocabulary(scenes: Sequence[SceneInstance], vocab: Vocabulary, max_unk_rate: float = 0.5) -> float:
    """Fraction of caption tokens that map to [UNK]; too many means the wrong vocabulary."""
    total = unknown = 0
    for scene in scenes:
        for caption in scene.captions:
            ids = vocab.encode(caption)
            total += len(ids)
            unknown += sum(1 for i in ids if vocab.token_of(i) == "[UNK]")
    rate = unknown / total if total else 0.0
    if rate > max_unk_rate:
        raise DataError(f"{rate:.1%} of caption tokens are out of vocabulary")
    if rate > 0:
        logger.warning("%.2f%% of caption tokens map to [UNK]", 100.0 * rate)
    return rate


def encode_scenes(scenes: Sequence[SceneInstance], vocab: Vocabulary) -> List[TrainingScene]:
    return [s.training_view(vocab) for s in scenes]


def split_sizes(n_images: int) -> Tuple[int, int, int]:
    """90/5/5 split; validation and test get at least one image when n >= 3."""
    n_val = max(1, int(math.floor(0.05 * n_images + 0.5))) if n_images >= 3 else 0
    n_test = n_val
    return n_images - n_val - n_test, n_val, n_test
