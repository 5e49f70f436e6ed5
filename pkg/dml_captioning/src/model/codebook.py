"""The mode codebook: k learnable mode embeddings plus lifetime usage counts."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np

from ..autograd import Tensor, parameter
from ..autograd import functional as F
from ..errors import ShapeError
from .assignment import ModeAssignment, distance_matrix, hungarian_assign, nearest_assign

logger = logging.getLogger(__name__)

INIT_STD = 0.5
DEFAULT_BETA = 0.25


@dataclass
class Codebook:
    entries: Tensor
    usage_counts: np.ndarray

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    @property
    def d_model(self) -> int:
        return self.entries.shape[1]

    def lookup(self, index: int) -> Tensor:
        """Differentiable row `index` of the codebook."""
        return F.row(self.entries, index)

    def assign(self, embeddings: np.ndarray, strategy: str = "hungarian") -> ModeAssignment:
        if strategy == "hungarian":
            return hungarian_assign(embeddings, self.entries.data)
        return nearest_assign(embeddings, self.entries.data)

    def record(self, assignment: ModeAssignment) -> None:
        for j in assignment.entries:
            self.usage_counts[j] += 1

    def effective_modes(self) -> List[int]:
        return [int(j) for j in np.nonzero(self.usage_counts > 0)[0]]


@dataclass(frozen=True)
class UsageReport:
    effective_modes: int
    counts: List[int]

    def to_log(self, step: int) -> Dict[str, Any]:
        return {"step": step, "effective_modes": self.effective_modes, "counts": self.counts}


def init_codebook(k: int, d_model: int, seed: int) -> Codebook:
    if k < 1:
        raise ValueError("codebook needs at least one entry")
    rng = np.random.default_rng(seed)
    entries = parameter(rng.normal(0.0, INIT_STD, size=(k, d_model)))
    return Codebook(entries=entries, usage_counts=np.zeros(k, dtype=np.int64))


def nearest_lookup(e: np.ndarray, codebook: Codebook) -> int:
    """argmin_j ||e - omega_j||_2; ties go to the lowest index."""
    e = np.asarray(e, dtype=np.float64).reshape(1, -1)
    if e.shape[1] != codebook.d_model:
        raise ShapeError("nearest_lookup", e.shape, codebook.entries.shape)
    return int(np.argmin(distance_matrix(e, codebook.entries.data)[0]))


def vq_losses(e: Tensor, q: Tensor, beta: float = DEFAULT_BETA) -> Tuple[Tensor, Tensor]:
    """(||sg[e] - q||^2, beta * ||e - sg[q]||^2).

    The first term trains the codebook entry only, the second the encoder only.
    """
    if e.shape != q.shape:
        raise ShapeError("vq_losses", e.shape, q.shape)
    codebook_loss = F.squared_distance(F.detach(e), q)
    commitment_loss = F.mul(F.squared_distance(e, F.detach(q)), beta)
    return codebook_loss, commitment_loss


def straight_through(e: Tensor, q: Tensor) -> Tensor:
    return F.straight_through(e, q)


def usage_report(codebook: Codebook) -> UsageReport:
    counts = [int(c) for c in codebook.usage_counts]
    return UsageReport(effective_modes=sum(1 for c in counts if c > 0), counts=counts)
