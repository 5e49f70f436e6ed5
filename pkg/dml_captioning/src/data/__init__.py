"""Caption Corpus Package"""

from .corpus import CorpusGrammar, SyntheticCorpus, TemplateFamily, classify_caption, generate_corpus, write_corpus
from .dataset import SceneInstance, TrainingScene, encode_scenes, load_dataset, load_split, write_dataset
from .vocab import Vocabulary, build_vocab, tokenize

__all__ = [
    "CorpusGrammar",
    "SyntheticCorpus",
    "TemplateFamily",
    "classify_caption",
    "generate_corpus",
    "write_corpus",
    "SceneInstance",
    "TrainingScene",
    "encode_scenes",
    "load_dataset",
    "load_split",
    "write_dataset",
    "Vocabulary",
    "build_vocab",
    "tokenize",
]
