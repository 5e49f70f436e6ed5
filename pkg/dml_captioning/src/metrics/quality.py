"""Sentence- and corpus-level caption quality: BLEU, ROUGE-L, CIDEr-D."""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from ..data.vocab import tokenize
from ..errors import DataError

logger = logging.getLogger(__name__)

Text = Union[str, Sequence[str]]
NGram = Tuple[str, ...]

BLEU_EPS = 1e-9
ROUGE_BETA = 1.2
CIDER_SIGMA = 6.0
CIDER_SCALE = 10.0
CIDER_MAX_N = 4


def as_tokens(text: Text) -> List[str]:
    return tokenize(text) if isinstance(text, str) else list(text)


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


# -- BLEU -------------------------------------------------------------------


def _closest_ref_length(c: int, ref_lengths: Sequence[int]) -> int:
    return min(ref_lengths, key=lambda r: (abs(r - c), r))


def _bleu_counts(cand: List[str], refs: List[List[str]], max_n: int) -> Tuple[List[int], List[int], int, int]:
    matches, totals = [], []
    for n in range(1, max_n + 1):
        cand_counts = ngrams(cand, n)
        max_ref: Counter = Counter()
        for ref in refs:
            for gram, count in ngrams(ref, n).items():
                max_ref[gram] = max(max_ref[gram], count)
        matches.append(sum(min(count, max_ref[gram]) for gram, count in cand_counts.items()))
        totals.append(max(len(cand) - n + 1, 0))
    return matches, totals, len(cand), _closest_ref_length(len(cand), [len(r) for r in refs])


def _brevity_penalty(c: int, r: int) -> float:
    if c > r:
        return 1.0
    return math.exp(1.0 - r / c) if c > 0 else 0.0


def bleu(candidate: Text, references: Sequence[Text], max_n: int = 4) -> float:
    """Sentence BLEU-`max_n` with uniform weights.

    Zero match counts are smoothed to eps / total (eps when the candidate has
    no n-grams of that order).
    """
    if not references:
        raise DataError("BLEU needs at least one reference")
    cand = as_tokens(candidate)
    if not cand:
        return 0.0
    matches, totals, c, r = _bleu_counts(cand, [as_tokens(x) for x in references], max_n)
    log_sum = 0.0
    for m, t in zip(matches, totals):
        if m > 0:
            p = m / t
        else:
            p = BLEU_EPS / t if t > 0 else BLEU_EPS
        log_sum += math.log(p)
    return _brevity_penalty(c, r) * math.exp(log_sum / max_n)


def corpus_bleu(candidates: Sequence[Text], references: Sequence[Sequence[Text]], max_n: int = 4) -> float:
    """Corpus BLEU: clipped counts and lengths summed before the geometric mean, unsmoothed."""
    if len(candidates) != len(references):
        raise DataError(f"{len(candidates)} candidates for {len(references)} reference sets")
    matches = np.zeros(max_n)
    totals = np.zeros(max_n)
    c_total = r_total = 0
    for candidate, refs in zip(candidates, references):
        if not refs:
            raise DataError("BLEU needs at least one reference")
        m, t, c, r = _bleu_counts(as_tokens(candidate), [as_tokens(x) for x in refs], max_n)
        matches += m
        totals += t
        c_total += c
        r_total += r
    if c_total == 0 or np.any(matches == 0):
        return 0.0
    log_p = float(np.mean(np.log(matches / totals)))
    return _brevity_penalty(c_total, r_total) * math.exp(log_p)


# -- ROUGE-L ----------------------------------------------------------------


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Text, references: Sequence[Text], beta: float = ROUGE_BETA) -> float:
    """LCS F-measure over a set of references.

    Precision P and recall R are each maximised over the references separately,
    as the COCO caption toolkit does, rather than taking the best per-reference
    F. The score is (1 + beta^2) P R / (R + beta^2 P).
    """
    if not references:
        raise DataError("ROUGE-L needs at least one reference")
    cand = as_tokens(candidate)
    if not cand:
        return 0.0
    precisions, recalls = [], []
    for ref in references:
        ref_tokens = as_tokens(ref)
        lcs = lcs_length(cand, ref_tokens)
        precisions.append(lcs / len(cand))
        recalls.append(lcs / len(ref_tokens) if ref_tokens else 0.0)
    p, r = max(precisions), max(recalls)
    if p == 0.0 or r == 0.0:
        return 0.0
    return ((1.0 + beta**2) * p * r) / (r + beta**2 * p)


# -- CIDEr-D ----------------------------------------------------------------


@dataclass
class IdfTable:
    """Document frequencies of reference n-grams; one document per image."""

    doc_freq: Dict[NGram, int] = field(default_factory=dict)
    n_images: int = 0
    scale: float = 1.0

    @classmethod
    def from_references(cls, references: Iterable[Sequence[Text]], max_n: int = CIDER_MAX_N) -> "IdfTable":
        doc_freq: Counter = Counter()
        n_images = 0
        for refs in references:
            n_images += 1
            grams = set()
            for ref in refs:
                tokens = as_tokens(ref)
                for n in range(1, max_n + 1):
                    grams.update(ngrams(tokens, n))
            doc_freq.update(grams)
        return cls(doc_freq=dict(doc_freq), n_images=n_images)

    def scaled(self, factor: float) -> "IdfTable":
        return IdfTable(self.doc_freq, self.n_images, self.scale * factor)

    def weight(self, gram: NGram) -> float:
        """log(N) - log(max(1, df))."""
        return self.scale * (math.log(self.n_images) - math.log(max(1, self.doc_freq.get(gram, 0))))


def _tfidf(tokens: List[str], idf: IdfTable) -> Tuple[List[Dict[NGram, float]], List[float]]:
    vecs, norms = [], []
    for n in range(1, CIDER_MAX_N + 1):
        vec = {g: count * idf.weight(g) for g, count in ngrams(tokens, n).items()}
        vecs.append(vec)
        norms.append(math.sqrt(sum(v * v for v in vec.values())))
    return vecs, norms


def _cider_sim(cand: Tuple, ref: Tuple, delta: float) -> np.ndarray:
    (c_vecs, c_norms), (r_vecs, r_norms) = cand, ref
    out = np.zeros(CIDER_MAX_N)
    for n in range(CIDER_MAX_N):
        val = sum(min(w, r_vecs[n].get(g, 0.0)) * r_vecs[n].get(g, 0.0) for g, w in c_vecs[n].items())
        if c_norms[n] != 0 and r_norms[n] != 0:
            val /= c_norms[n] * r_norms[n]
        out[n] = val * math.exp(-(delta**2) / (2.0 * CIDER_SIGMA**2))
    return out


def cider_d(candidate: Text, references: Sequence[Text], idf: IdfTable) -> float:
    """CIDEr-D of one candidate: clipped TF-IDF cosine with a Gaussian length penalty, x10."""
    if idf.n_images == 0:
        raise DataError("CIDEr-D needs a non-empty idf table")
    if not references:
        raise DataError("CIDEr-D needs at least one reference")
    cand_tokens = as_tokens(candidate)
    cand = _tfidf(cand_tokens, idf)
    score = np.zeros(CIDER_MAX_N)
    for ref in references:
        ref_tokens = as_tokens(ref)
        score += _cider_sim(cand, _tfidf(ref_tokens, idf), float(len(cand_tokens) - len(ref_tokens)))
    return float(np.mean(score) / len(references) * CIDER_SCALE)


def corpus_cider_d(candidates: Sequence[Text], references: Sequence[Sequence[Text]], idf: IdfTable) -> float:
    if len(candidates) != len(references):
        raise DataError(f"{len(candidates)} candidates for {len(references)} reference sets")
    return float(np.mean([cider_d(c, r, idf) for c, r in zip(candidates, references)]))
