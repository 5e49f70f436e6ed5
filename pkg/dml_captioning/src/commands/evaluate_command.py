"""Caption evaluation command: quality, oracle, diversity, purity."""

import argparse
import asyncio
import json
import logging
from pathlib import Path
from typing import Any, Dict

from ..analysis.modes import assign_caption_modes
from ..data.dataset import load_dataset
from ..errors import CheckpointError, ConfigError
from ..metrics.purity import mode_purity
from ..metrics.quality import IdfTable
from ..metrics.report import build_report
from ..training.checkpoint import load_checkpoint, restore_model
from ..utils import read_jsonl
from .common import error_result, resolve_split

logger = logging.getLogger(__name__)


def register_evaluate_command(subparsers: argparse._SubParsersAction) -> None:
    """Register the `evaluate` command."""
    parser = subparsers.add_parser("evaluate", help="score generated captions against references")
    parser.add_argument("--candidates", required=True, help="captions JSONL from `generate`")
    parser.add_argument("--data", required=True, help="corpus directory or dataset JSONL")
    parser.add_argument("--split", default="test", choices=["train", "val", "test"])
    parser.add_argument("--purity", action="store_true", help="score learned modes against family labels")
    parser.add_argument("--ckpt", default=None, help="checkpoint used for --purity")
    parser.add_argument("--per-image", default=None, help="write per-candidate scores to this CSV")
    parser.add_argument("--out", default=None, help="write the report JSON here as well")
    parser.set_defaults(handler=cmd_evaluate)


async def cmd_evaluate(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Evaluate generated captions.

    Args:
        args: Parsed `evaluate` arguments

    Returns:
        Dictionary holding the metrics report
    """
    config = {
        "candidates": args.candidates,
        "data": args.data,
        "split": args.split,
        "purity": args.purity,
        "ckpt": args.ckpt,
    }
    try:
        if args.purity and not args.ckpt:
            raise ConfigError("--purity needs --ckpt to assign modes to reference captions")
        scenes = load_dataset(resolve_split(args.data, args.split))
        references = {s.image_id: list(s.captions) for s in scenes}
        candidates = read_jsonl(Path(args.candidates))
        idf = IdfTable.from_references(references[i] for i in sorted(references))

        purity = None
        if args.purity:
            checkpoint = load_checkpoint(Path(args.ckpt))
            if checkpoint.vocab is None:
                raise CheckpointError(f"checkpoint {args.ckpt} has no vocabulary")
            model = restore_model(checkpoint)
            assigned = await asyncio.to_thread(assign_caption_modes, scenes, model, checkpoint.vocab)
            purity = mode_purity(assigned.modes, assigned.labels)

        report = await asyncio.to_thread(build_report, candidates, references, idf, purity)
        payload = report.to_json()
        if args.out:
            Path(args.out).parent.mkdir(parents=True, exist_ok=True)
            Path(args.out).write_text(json.dumps(payload, indent=2), encoding="utf-8")
        if args.per_image:
            Path(args.per_image).parent.mkdir(parents=True, exist_ok=True)
            report.per_image.to_csv(args.per_image, index=False, float_format="%.10g")
        logger.info("oracle CIDEr-D %.4f over %d images", report.oracle["cider_d"], report.n_images)
        return {"status": "success", "config": config, "report": payload}
    except Exception as e:
        return error_result(e, config=config)
