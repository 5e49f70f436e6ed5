"""Synthetic multi-reference caption corpus with known template families.

Each image is a scene of three colored objects in a place. Its captions are
rendered from distinct template families, each with a surface pattern that a
regular expression recognizes exactly, so learned modes can be scored against
the generating family.
"""

import logging
import re
import zlib
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from .dataset import SceneInstance, split_sizes, write_dataset
from .vocab import Vocabulary, build_vocab, tokenize

logger = logging.getLogger(__name__)

OBJECTS = [
    "dog", "cat", "horse", "bird", "car", "bus", "train", "boat",
    "chair", "table", "cake", "pizza", "kite", "clock", "vase", "bench",
    "bicycle", "umbrella", "giraffe", "zebra", "elephant", "sheep", "cow", "laptop",
]  # fmt: skip
COLORS = ["red", "blue", "green", "yellow", "white", "black", "brown", "orange"]
PLACES = ["park", "kitchen", "street", "field", "room", "beach", "yard", "garden"]

OBJECTS_PER_SCENE = 3
FEATURE_NOISE = 0.05


@dataclass(frozen=True)
class Scene:
    objects: Tuple[str, ...]
    colors: Tuple[str, ...]
    place: str


@dataclass(frozen=True)
class TemplateFamily:
    family_id: int
    name: str
    template: str

    def render(self, scene: Scene) -> str:
        slots: Dict[str, str] = {"p": scene.place}
        for i in range(OBJECTS_PER_SCENE):
            slots[f"o{i}"] = scene.objects[i]
            slots[f"c{i}"] = scene.colors[i]
        return self.template.format(**slots)

    def pattern(self, objects: str, colors: str, places: str) -> "re.Pattern[str]":
        body = re.sub(r"\{o\d\}", lambda _: objects, self.template)
        body = re.sub(r"\{c\d\}", lambda _: colors, body)
        body = body.replace("{p}", places)
        return re.compile(rf"^{body}$")


FAMILIES = [
    TemplateFamily(0, "existential", "there is a {c0} {o0} in the {p}"),
    TemplateFamily(1, "enumerative", "{o0} and {o1} and {o2}"),
    TemplateFamily(2, "brief", "a {o0}"),
    TemplateFamily(3, "verbose", "a very large {c0} {o0} sits beside a {c1} {o1} and a {c2} {o2} in the {p}"),
    TemplateFamily(4, "passive", "the {o0} is being watched by the {o1}"),
    TemplateFamily(5, "close_up", "a close up of a {c0} {o0}"),
    TemplateFamily(6, "with", "{c0} {o0} with {c1} {o1}"),
    TemplateFamily(7, "locative", "in the {p} a {o0} is sitting next to a {o1}"),
]


def _lexicon(base: Sequence[str], size: int, stem: str) -> List[str]:
    if size < 1:
        raise ConfigError(f"{stem} lexicon needs at least one entry")
    return list(base[:size]) + [f"{stem}{i}" for i in range(len(base), size)]


class CorpusGrammar:
    """Lexicons plus compiled pattern tests for every template family."""

    def __init__(self, n_objects: int = len(OBJECTS), n_colors: int = len(COLORS), n_places: int = len(PLACES)):
        if n_objects < OBJECTS_PER_SCENE:
            raise ConfigError(f"need at least {OBJECTS_PER_SCENE} objects, got {n_objects}")
        self.objects = _lexicon(OBJECTS, n_objects, "object")
        self.colors = _lexicon(COLORS, n_colors, "color")
        self.places = _lexicon(PLACES, n_places, "place")
        alt = lambda words: "(?:" + "|".join(re.escape(w) for w in words) + ")"  # noqa: E731
        self._patterns = [(f.family_id, f.pattern(alt(self.objects), alt(self.colors), alt(self.places))) for f in FAMILIES]

    def classify(self, caption: str) -> Optional[int]:
        """Family id whose pattern matches the normalized caption, else None."""
        text = " ".join(tokenize(caption))
        for family_id, pattern in self._patterns:
            if pattern.match(text):
                return family_id
        return None

    def sample_scene(self, rng: np.random.Generator) -> Scene:
        picked = np.sort(rng.choice(len(self.objects), size=OBJECTS_PER_SCENE, replace=False))
        colors = rng.integers(len(self.colors), size=OBJECTS_PER_SCENE)
        place = int(rng.integers(len(self.places)))
        return Scene(
            objects=tuple(self.objects[i] for i in picked),
            colors=tuple(self.colors[int(c)] for c in colors),
            place=self.places[place],
        )


_DEFAULT_GRAMMAR: Optional[CorpusGrammar] = None


def classify_caption(caption: str, grammar: Optional[CorpusGrammar] = None) -> Optional[int]:
    global _DEFAULT_GRAMMAR
    if grammar is None:
        if _DEFAULT_GRAMMAR is None:
            _DEFAULT_GRAMMAR = CorpusGrammar()
        grammar = _DEFAULT_GRAMMAR
    return grammar.classify(caption)


@lru_cache(maxsize=4096)
def _concept(kind: str, name: str, d_img: int) -> Tuple[float, ...]:
    rng = np.random.default_rng(zlib.crc32(f"{kind}:{name}".encode("utf-8")))
    return tuple(rng.normal(size=d_img) / np.sqrt(d_img))


def concept_vector(kind: str, name: str, d_img: int) -> np.ndarray:
    """Fixed pseudo-random direction for an object, color or place name."""
    return np.asarray(_concept(kind, name, d_img))


def scene_features(scene: Scene, d_img: int, n_regions: int, rng: np.random.Generator) -> np.ndarray:
    """One region per colored object, one for the place, the rest background; shuffled."""
    if n_regions < OBJECTS_PER_SCENE + 1:
        raise ConfigError(f"need at least {OBJECTS_PER_SCENE + 1} regions, got {n_regions}")
    regions = np.zeros((n_regions, d_img))
    for i, (obj, color) in enumerate(zip(scene.objects, scene.colors)):
        regions[i] = concept_vector("object", obj, d_img) + concept_vector("color", color, d_img)
    regions[OBJECTS_PER_SCENE] = concept_vector("place", scene.place, d_img)
    regions += rng.normal(0.0, FEATURE_NOISE, size=regions.shape)
    return np.round(regions[rng.permutation(n_regions)], 6)


@dataclass
class SyntheticCorpus:
    train: List[SceneInstance]
    val: List[SceneInstance]
    test: List[SceneInstance]
    grammar: CorpusGrammar

    @property
    def splits(self) -> Dict[str, List[SceneInstance]]:
        return {"train": self.train, "val": self.val, "test": self.test}

    def all_scenes(self) -> List[SceneInstance]:
        return self.train + self.val + self.test

    def build_vocab(self, min_count: int = 1) -> Vocabulary:
        return build_vocab((c for s in self.train for c in s.captions), min_count)


def generate_corpus(
    n_images: int = 2000,
    n_caps_per_image: int = 5,
    n_families: int = 8,
    n_objects: int = len(OBJECTS),
    n_colors: int = len(COLORS),
    n_places: int = len(PLACES),
    d_img: int = 32,
    n_regions: int = 6,
    seed: int = 0,
) -> SyntheticCorpus:
    """Deterministic synthetic corpus; every caption of an image comes from a distinct family."""
    if not 1 <= n_families <= len(FAMILIES):
        raise ConfigError(f"n_families must be between 1 and {len(FAMILIES)}, got {n_families}")
    if not 1 <= n_caps_per_image <= n_families:
        raise ConfigError(
            f"{n_caps_per_image} captions per image need at least as many families, got {n_families}"
        )
    if n_images < 1:
        raise ConfigError("n_images must be positive")
    grammar = CorpusGrammar(n_objects, n_colors, n_places)
    rng = np.random.default_rng(seed)

    scenes: List[SceneInstance] = []
    for idx in range(n_images):
        scene = grammar.sample_scene(rng)
        families = [int(f) for f in rng.choice(n_families, size=n_caps_per_image, replace=False)]
        scenes.append(
            SceneInstance(
                image_id=f"img-{idx + 1:06d}",
                features=scene_features(scene, d_img, n_regions, rng),
                captions=[FAMILIES[f].render(scene) for f in families],
                mode_labels=families,
            )
        )

    n_train, n_val, _ = split_sizes(n_images)
    order = rng.permutation(n_images)
    pick = lambda ids: [scenes[i] for i in sorted(ids)]  # noqa: E731
    corpus = SyntheticCorpus(
        train=pick(order[:n_train]),
        val=pick(order[n_train : n_train + n_val]),
        test=pick(order[n_train + n_val :]),
        grammar=grammar,
    )
    logger.info(
        "generated %d images (%d/%d/%d) with %d families",
        n_images, len(corpus.train), len(corpus.val), len(corpus.test), n_families,
    )  # fmt: skip
    return corpus


def family_counts(scenes: Sequence[SceneInstance]) -> Dict[int, int]:
    counts: Dict[int, int] = {}
    for scene in scenes:
        for label in scene.mode_labels or []:
            counts[label] = counts.get(label, 0) + 1
    return dict(sorted(counts.items()))


def write_corpus(corpus: SyntheticCorpus, out_dir: Path, min_count: int = 1) -> Dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths: Dict[str, Path] = {}
    for split, scenes in corpus.splits.items():
        paths[split] = out_dir / f"{split}.jsonl"
        write_dataset(paths[split], scenes)
    paths["vocab"] = out_dir / "vocab.json"
    corpus.build_vocab(min_count).save(paths["vocab"])
    return paths
