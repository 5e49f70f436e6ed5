"""Caption-to-mode assignment: nearest-neighbour lookup and Hungarian matching.

The Hungarian solver is the rectangular Kuhn-Munkres algorithm with row/column
potentials, O(n^2 k) for n captions and k codebook entries. Leaving k - n
entries unmatched is the same as padding the caption side with zero-cost
dummy rows. Among equal-cost optima the lexicographically smallest assignment
vector is returned.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import AssignmentError, ShapeError

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-12
DUAL_TOL = 1e-9


@dataclass
class ModeAssignment:
    """Caption index -> codebook entry, with the Euclidean cost of each pair."""

    pairs: List[Tuple[int, int]]
    costs: List[float]
    total_cost: float = field(init=False)

    def __post_init__(self) -> None:
        self.total_cost = float(sum(self.costs))

    @property
    def entries(self) -> List[int]:
        return [j for _, j in self.pairs]

    def entry_for(self, caption_index: int) -> int:
        return self.pairs[caption_index][1]

    def is_injective(self) -> bool:
        return len(set(self.entries)) == len(self.pairs)

    def to_dict(self) -> Dict[str, object]:
        return {"entries": self.entries, "costs": self.costs, "total_cost": self.total_cost}


def distance_matrix(embeddings: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """Euclidean distances ||e_i - omega_j||_2 as an n x k matrix."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    entries = np.asarray(entries, dtype=np.float64)
    if embeddings.shape[1] != entries.shape[1]:
        raise ShapeError("distance_matrix", embeddings.shape, entries.shape)
    diff = embeddings[:, None, :] - entries[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def _kuhn_munkres(cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-cost matching of every row of an n x m matrix (n <= m).

    Returns (row -> column, row potentials u, column potentials v) with
    u_i + v_j <= cost_ij everywhere and equality on matched pairs.
    """
    n, m = cost.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    match = np.zeros(m + 1, dtype=np.int64)  # column -> row (1-based), 0 = free
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = match[j0]
            free = ~used[1:]
            reduced = cost[i0 - 1] - u[i0] - v[1:]
            better = free & (reduced < minv[1:])
            minv[1:][better] = reduced[better]
            way[1:][better] = j0
            candidates = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(candidates)) + 1
            delta = candidates[j1 - 1]
            visited = np.nonzero(used)[0]
            u[match[visited]] += delta
            v[visited] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while True:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if match[j]:
            row_to_col[match[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _path_cost(cost: np.ndarray, cols: Sequence[int]) -> float:
    return float(sum(cost[i, j] for i, j in enumerate(cols)))


def _solve_with_prefix(cost: np.ndarray, prefix: List[int]) -> Optional[List[int]]:
    """Optimal completion of the rows after `prefix` on the remaining columns."""
    n, m = cost.shape
    rest_rows = list(range(len(prefix), n))
    if not rest_rows:
        return list(prefix)
    taken = set(prefix)
    rest_cols = [j for j in range(m) if j not in taken]
    if len(rest_cols) < len(rest_rows):
        return None
    sub = cost[np.ix_(rest_rows, rest_cols)]
    sub_cols, _, _ = _kuhn_munkres(sub)
    return list(prefix) + [rest_cols[c] for c in sub_cols]


def solve_assignment(cost: np.ndarray) -> List[int]:
    """Lexicographically smallest minimum-cost injective row -> column map."""
    cost = np.asarray(cost, dtype=np.float64)
    n, m = cost.shape
    if n > m:
        raise AssignmentError(f"cannot assign {n} captions injectively to {m} codebook entries")
    if n == 0:
        return []
    cols, u, v = _kuhn_munkres(cost)
    best = _path_cost(cost, cols)
    tie_tol = TIE_RTOL * max(1.0, abs(best))
    dual_tol = DUAL_TOL * max(1.0, float(np.abs(cost).max()))
    reduced = cost - u[:, None] - v[None, :]
    current = [int(c) for c in cols]
    for i in range(n):
        prefix = current[:i]
        for j in range(current[i]):
            # an edge outside the zero-reduced-cost subgraph is in no optimum
            if j in prefix or reduced[i, j] > dual_tol:
                continue
            candidate = _solve_with_prefix(cost, prefix + [j])
            if candidate is not None and _path_cost(cost, candidate) <= best + tie_tol:
                current = candidate
                break
    return current


def hungarian_assign(embeddings: np.ndarray, entries: np.ndarray) -> ModeAssignment:
    """Minimum-total-distance injective assignment of caption embeddings to entries."""
    embeddings = np.atleast_2d(np.asarray(embeddings, dtype=np.float64))
    n, k = embeddings.shape[0], entries.shape[0]
    if n > k:
        raise AssignmentError(f"cannot assign {n} captions injectively to {k} codebook entries")
    cost = distance_matrix(embeddings, entries)
    cols = solve_assignment(cost)
    return ModeAssignment(
        pairs=[(i, j) for i, j in enumerate(cols)],
        costs=[float(cost[i, j]) for i, j in enumerate(cols)],
    )


def nearest_assign(embeddings: np.ndarray, entries: np.ndarray) -> ModeAssignment:
    """Independent nearest-entry lookup per caption; entries may repeat."""
    cost = distance_matrix(embeddings, entries)
    cols = [int(np.argmin(row)) for row in cost]
    return ModeAssignment(
        pairs=[(i, j) for i, j in enumerate(cols)],
        costs=[float(cost[i, j]) for i, j in enumerate(cols)],
    )
