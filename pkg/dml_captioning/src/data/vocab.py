"""Caption vocabulary and tokenizer."""

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

from ..errors import DataError

PAD, BOS, EOS, MASK, MODE, UNK = 0, 1, 2, 3, 4, 5
SPECIAL_TOKENS = ["[PAD]", "[BOS]", "[EOS]", "[MASK]", "[MODE]", "[UNK]"]
MAX_CAPTION_TOKENS = 20

_PUNCT = re.compile(r"[^\w\s]")


def tokenize(text: str) -> List[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _PUNCT.sub(" ", text.lower()).split()


@dataclass
class Vocabulary:
    tokens: List[str]
    min_count: int = 1
    index: Dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.tokens[: len(SPECIAL_TOKENS)] != SPECIAL_TOKENS:
            raise DataError("vocabulary must start with the special tokens")
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise DataError("vocabulary contains duplicate tokens")

    def __len__(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        return self.index.get(token, UNK)

    def token_of(self, token_id: int) -> str:
        return self.tokens[token_id]

    def encode(self, text: str, max_tokens: int = MAX_CAPTION_TOKENS) -> List[int]:
        """Token ids of a caption, truncated to `max_tokens`; no BOS/EOS."""
        return [self.id_of(t) for t in tokenize(text)[:max_tokens]]

    def decode(self, ids: Sequence[int]) -> str:
        """Caption text with special tokens dropped; stops at the first [EOS]."""
        words = []
        for i in ids:
            if i == EOS:
                break
            if i < len(SPECIAL_TOKENS) and i != UNK:
                continue
            words.append(self.tokens[i])
        return " ".join(words)

    def to_json(self) -> Dict[str, object]:
        return {"tokens": self.tokens, "min_count": self.min_count}

    @classmethod
    def from_json(cls, payload: Dict[str, object]) -> "Vocabulary":
        if "tokens" not in payload:
            raise DataError("vocabulary JSON is missing 'tokens'")
        return cls(tokens=list(payload["tokens"]), min_count=int(payload.get("min_count", 1)))

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        try:
            payload = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise DataError(f"cannot read vocabulary {path}: {e}") from e
        return cls.from_json(payload)


def build_vocab(captions: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Vocabulary over the given captions; words rarer than `min_count` map to [UNK].

    Words are ordered by descending frequency, then alphabetically.
    """
    counts: Counter = Counter()
    seen_any = False
    for caption in captions:
        seen_any = True
        counts.update(tokenize(caption))
    if not seen_any or not counts:
        raise DataError("cannot build a vocabulary from an empty corpus")
    kept = sorted((w for w, c in counts.items() if c >= min_count and w not in SPECIAL_TOKENS), key=lambda w: (-counts[w], w))
    return Vocabulary(tokens=SPECIAL_TOKENS + kept, min_count=min_count)
