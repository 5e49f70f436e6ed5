"""Mode assignments of reference captions under a trained mode encoder."""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..autograd import no_grad
from ..data.dataset import SceneInstance
from ..data.vocab import Vocabulary
from ..model.cdvae import encode_mode
from ..model.dml import DMLModel

logger = logging.getLogger(__name__)


@dataclass
class CaptionModes:
    image_ids: List[str]
    embeddings: np.ndarray
    modes: List[int]
    labels: Optional[List[int]]

    def __len__(self) -> int:
        return len(self.modes)


def assign_caption_modes(
    scenes: Sequence[SceneInstance],
    model: DMLModel,
    vocab: Vocabulary,
    strategy: Optional[str] = None,
) -> CaptionModes:
    """Encode every reference caption and match each image's captions to codebook entries."""
    strategy = strategy or model.cfg.assignment
    image_ids: List[str] = []
    embeddings: List[np.ndarray] = []
    modes: List[int] = []
    labels: List[int] = []
    has_labels = all(s.mode_labels is not None for s in scenes)
    with no_grad():
        for scene in scenes:
            view = scene.training_view(vocab)
            vectors = np.stack([encode_mode(c, model).data for c in view.captions])
            assignment = model.codebook.assign(vectors, strategy)
            image_ids.extend([scene.image_id] * len(view.captions))
            embeddings.extend(vectors)
            modes.extend(assignment.entries)
            if has_labels:
                labels.extend(scene.mode_labels or [])
    return CaptionModes(
        image_ids=image_ids,
        embeddings=np.asarray(embeddings).reshape(len(modes), model.cfg.d_model),
        modes=[int(m) for m in modes],
        labels=labels if has_labels else None,
    )
