"""Embedding projection export command."""

import argparse
import asyncio
import logging
from pathlib import Path
from typing import Any, Dict

from ..analysis.modes import assign_caption_modes
from ..analysis.projection import project_embeddings, write_projection_csv, write_scatter_svg
from ..data.dataset import load_dataset
from ..errors import CheckpointError
from ..training.checkpoint import load_checkpoint, restore_model
from .common import error_result, resolve_split

logger = logging.getLogger(__name__)


def register_project_command(subparsers: argparse._SubParsersAction) -> None:
    """Register the `project` command."""
    parser = subparsers.add_parser("project", help="export a 2-D projection of modes and captions")
    parser.add_argument("--ckpt", required=True, help="checkpoint directory")
    parser.add_argument("--data", required=True, help="corpus directory or dataset JSONL")
    parser.add_argument("--split", default="test", choices=["train", "val", "test"])
    parser.add_argument("--limit", type=int, default=None, help="only the first N images")
    parser.add_argument("--out", required=True, help="projection CSV")
    parser.add_argument("--svg", default=None, help="optional scatter plot")
    parser.set_defaults(handler=cmd_project)


async def cmd_project(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Project active codebook entries and caption embeddings onto one PCA basis.

    Args:
        args: Parsed `project` arguments

    Returns:
        Dictionary with output paths and explained variance
    """
    config = {"ckpt": args.ckpt, "data": args.data, "split": args.split, "limit": args.limit}
    try:
        checkpoint = load_checkpoint(Path(args.ckpt))
        if checkpoint.vocab is None:
            raise CheckpointError(f"checkpoint {args.ckpt} has no vocabulary")
        model = restore_model(checkpoint)
        scenes = load_dataset(resolve_split(args.data, args.split), d_img=model.cfg.d_img)
        if args.limit is not None:
            scenes = scenes[: args.limit]

        assigned = await asyncio.to_thread(assign_caption_modes, scenes, model, checkpoint.vocab)
        active = model.codebook.effective_modes()
        projection = project_embeddings(model.codebook.entries.data, active, assigned.embeddings, assigned.modes)
        csv_path = write_projection_csv(projection, Path(args.out))
        svg_path = write_scatter_svg(projection, Path(args.svg)) if args.svg else None
        logger.info("projected %d modes and %d captions", len(active), len(assigned))
        return {
            "status": "success",
            "config": config,
            "csv": str(csv_path),
            "svg": None if svg_path is None else str(svg_path),
            "active_modes": active,
            "n_captions": len(assigned),
            "explained_variance": projection.explained_variance,
        }
    except Exception as e:
        return error_result(e, config=config)
