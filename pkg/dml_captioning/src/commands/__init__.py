"""DML Captioning Commands Package"""

from .corpus_command import register_corpus_command
from .train_command import register_train_command
from .generate_command import register_generate_command
from .evaluate_command import register_evaluate_command
from .project_command import register_project_command

__all__ = [
    "register_corpus_command",
    "register_train_command",
    "register_generate_command",
    "register_evaluate_command",
    "register_project_command",
]
