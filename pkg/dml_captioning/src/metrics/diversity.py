"""Set-level diversity of the captions generated for one image."""

import logging
import math
from typing import Sequence

import numpy as np
from scipy.linalg import eigvalsh

from ..errors import DataError
from .quality import CIDER_SCALE, IdfTable, Text, as_tokens, bleu, cider_d, ngrams

logger = logging.getLogger(__name__)


def div_n(captions: Sequence[Text], n: int) -> float:
    """Distinct n-grams over total n-grams across the caption set.

    The score lies in (0, 1] whenever the set has an n-gram. A set where every
    caption is shorter than `n` (possible with degenerate generations) scores
    0.0 rather than failing the whole report.
    """
    if not captions:
        raise DataError("Div-n needs at least one caption")
    distinct = set()
    total = 0
    for caption in captions:
        grams = ngrams(as_tokens(caption), n)
        distinct.update(grams)
        total += sum(grams.values())
    return len(distinct) / total if total else 0.0


def mbleu(captions: Sequence[Text], max_n: int = 4) -> float:
    """Mean smoothed BLEU of each caption against the rest of the set; lower is more diverse."""
    m = len(captions)
    if m < 2:
        raise DataError("mBLEU needs at least two captions")
    scores = [bleu(captions[i], [c for j, c in enumerate(captions) if j != i], max_n) for i in range(m)]
    return float(np.mean(scores))


def cider_kernel(captions: Sequence[Text], idf: IdfTable) -> np.ndarray:
    """Symmetric pairwise similarity in [0, 1] from single-reference CIDEr-D."""
    m = len(captions)
    kernel = np.eye(m)
    for i in range(m):
        for j in range(m):
            if i != j:
                kernel[i, j] = min(max(cider_d(captions[i], [captions[j]], idf) / CIDER_SCALE, 0.0), 1.0)
    kernel = 0.5 * (kernel + kernel.T)
    np.fill_diagonal(kernel, 1.0)
    return kernel


def kernel_diversity(kernel: np.ndarray) -> float:
    """-log(sqrt(l_max) / sum(sqrt(l))) / log(m): 0 for a rank-1 kernel, 1 for the identity."""
    m = kernel.shape[0]
    eigenvalues = eigvalsh(kernel)
    eigenvalues[eigenvalues < 1e-12 * max(float(eigenvalues.max()), 1.0)] = 0.0
    roots = np.sqrt(eigenvalues)
    total = float(roots.sum())
    if total <= 0.0:
        return 0.0
    score = -math.log(float(roots.max()) / total) / math.log(m)
    return float(min(max(score, 0.0), 1.0))


def self_cider(captions: Sequence[Text], idf: IdfTable) -> float:
    if len(captions) < 2:
        raise DataError("SelfCIDEr needs at least two captions")
    return kernel_diversity(cider_kernel(captions, idf))


def mean_over_images(values: Sequence[float]) -> float:
    return float(np.mean(values)) if len(values) else 0.0
