"""DML Captioning Command-Line Surface"""

import argparse

from .commands import (
    register_corpus_command,
    register_evaluate_command,
    register_generate_command,
    register_project_command,
    register_train_command,
)


def build_parser() -> argparse.ArgumentParser:
    """Parser with every command registered; each sets `handler` to its async function."""
    parser = argparse.ArgumentParser(
        prog="dml-captioning",
        description=(
            "Discrete mode learning for controllable captioning: synthetic corpora, "
            "joint CdVAE/MIC training, mode-selected generation, evaluation and projection."
        ),
    )
    parser.add_argument("--log-level", default=None, help="overrides DML_LOG_LEVEL")
    subparsers = parser.add_subparsers(dest="command", required=True)

    register_corpus_command(subparsers)
    register_train_command(subparsers)
    register_generate_command(subparsers)
    register_evaluate_command(subparsers)
    register_project_command(subparsers)
    return parser
