"""Model-agnostic left-to-right search over a next-token log-probability function."""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from ..errors import ConfigError

logger = logging.getLogger(__name__)

# prefix (starting with BOS) -> log-probabilities over the vocabulary
StepFn = Callable[[Sequence[int]], np.ndarray]


@dataclass(frozen=True)
class Hypothesis:
    tokens: Tuple[int, ...]
    logprob: float
    finished: bool

    def score(self, length_penalty: float = 0.0) -> float:
        if length_penalty == 0.0 or not self.tokens:
            return self.logprob
        return self.logprob / (len(self.tokens) ** length_penalty)


def greedy_search(step_fn: StepFn, bos: int, eos: int, max_len: int) -> Hypothesis:
    """Argmax at every step (lowest id wins ties) until EOS or `max_len` tokens."""
    tokens: List[int] = []
    total = 0.0
    for _ in range(max_len):
        log_probs = step_fn([bos, *tokens])
        token = int(np.argmax(log_probs))
        total += float(log_probs[token])
        tokens.append(token)
        if token == eos:
            return Hypothesis(tuple(tokens), total, True)
    return Hypothesis(tuple(tokens), total, False)


def beam_search(
    step_fn: StepFn,
    bos: int,
    eos: int,
    width: int,
    max_len: int,
    length_penalty: float = 0.0,
) -> Hypothesis:
    """Standard beam search returning the best finished (or truncated) hypothesis.

    Candidates are ranked by (score, beam index, token id) so that width 1
    follows exactly the same path as `greedy_search`.
    """
    if width < 1:
        raise ConfigError(f"beam width must be >= 1, got {width}")
    beams = [Hypothesis((), 0.0, False)]
    pool: List[Hypothesis] = []

    for _ in range(max_len):
        candidates: List[Tuple[float, int, int, Hypothesis]] = []
        for b, hyp in enumerate(beams):
            log_probs = step_fn([bos, *hyp.tokens])
            for token in np.argsort(-log_probs, kind="stable")[:width]:
                token = int(token)
                ext = Hypothesis(hyp.tokens + (token,), hyp.logprob + float(log_probs[token]), token == eos)
                candidates.append((-ext.score(length_penalty), b, token, ext))
        candidates.sort(key=lambda c: (c[0], c[1], c[2]))

        beams = []
        for _, _, _, ext in candidates[:width]:
            (pool if ext.finished else beams).append(ext)
        if not beams:
            break
        if length_penalty == 0.0 and pool:
            best_done = max(h.logprob for h in pool)
            if best_done >= max(h.logprob for h in beams):
                break

    pool.extend(beams)
    best = min(enumerate(pool), key=lambda item: (-item[1].score(length_penalty), item[0]))
    return best[1]
