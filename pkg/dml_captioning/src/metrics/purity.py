"""Agreement between learned mode assignments and ground-truth template families."""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence

import numpy as np
from sklearn.metrics import adjusted_rand_score
from sklearn.metrics.cluster import contingency_matrix

from ..errors import DataError


@dataclass(frozen=True)
class PurityReport:
    purity: float
    adjusted_rand: float
    n_captions: int
    n_modes: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "purity": self.purity,
            "adjusted_rand": self.adjusted_rand,
            "n_captions": self.n_captions,
            "n_modes": self.n_modes,
        }


def mode_purity(assignments: Sequence[int], mode_labels: Optional[Sequence[Optional[int]]]) -> PurityReport:
    """Sum over modes of the largest family overlap, divided by the caption count."""
    if mode_labels is None or len(mode_labels) == 0 or any(label is None for label in mode_labels):
        raise DataError("mode purity needs a ground-truth family label for every caption")
    if len(assignments) != len(mode_labels):
        raise DataError(f"{len(assignments)} assignments for {len(mode_labels)} labels")
    table = contingency_matrix(np.asarray(mode_labels), np.asarray(assignments))
    purity = float(table.max(axis=0).sum() / table.sum())
    return PurityReport(
        purity=purity,
        adjusted_rand=float(adjusted_rand_score(mode_labels, assignments)),
        n_captions=len(assignments),
        n_modes=int(table.shape[1]),
    )
