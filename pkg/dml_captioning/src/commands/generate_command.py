"""Mode-selected caption generation command."""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, List

from ..data.dataset import SceneInstance, load_dataset
from ..errors import CheckpointError, ConfigError
from ..model.mic import DecodeSpec, generate_all_modes
from ..training.checkpoint import load_checkpoint, restore_model
from ..utils import write_jsonl
from .common import error_result, map_workers, parse_modes, resolve_split

logger = logging.getLogger(__name__)


def register_generate_command(subparsers: argparse._SubParsersAction) -> None:
    """Register the `generate` command."""
    parser = subparsers.add_parser("generate", help="caption images once per selected mode")
    parser.add_argument("--ckpt", required=True, help="checkpoint directory")
    parser.add_argument("--data", required=True, help="corpus directory or dataset JSONL")
    parser.add_argument("--split", default="test", choices=["train", "val", "test"])
    parser.add_argument("--modes", default="all", help="'all' effective modes or e.g. 3,7")
    parser.add_argument("--decode", default="greedy", help="greedy | beam:<width>")
    parser.add_argument("--length-penalty", type=float, default=0.0, help="beam length normalization exponent")
    parser.add_argument("--max-len", type=int, default=21, help="maximum generated tokens including [EOS]")
    parser.add_argument("--limit", type=int, default=None, help="only the first N images")
    parser.add_argument("--workers", type=int, default=None, help="worker threads (default DML_WORKERS)")
    parser.add_argument("--out", required=True, help="output captions JSONL")
    parser.set_defaults(handler=cmd_generate)


async def cmd_generate(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Generate one caption per effective (or listed) mode for every image.

    Args:
        args: Parsed `generate` arguments

    Returns:
        Dictionary with the output path and caption counts
    """
    config = {
        "ckpt": args.ckpt,
        "data": args.data,
        "split": args.split,
        "modes": args.modes,
        "decode": args.decode,
        "length_penalty": args.length_penalty,
        "max_len": args.max_len,
        "limit": args.limit,
    }
    try:
        spec = DecodeSpec.parse(args.decode, args.length_penalty)
        modes = parse_modes(args.modes)
        checkpoint = load_checkpoint(Path(args.ckpt))
        vocab = checkpoint.vocab
        if vocab is None:
            raise CheckpointError(f"checkpoint {args.ckpt} has no vocabulary")
        model = restore_model(checkpoint)
        if modes is not None and modes[-1] >= model.cfg.k:
            raise ConfigError(f"mode {modes[-1]} outside codebook of size {model.cfg.k}")
        scenes = load_dataset(resolve_split(args.data, args.split), d_img=model.cfg.d_img)
        if args.limit is not None:
            scenes = scenes[: args.limit]

        def caption_scene(scene: SceneInstance) -> List[Dict[str, Any]]:
            captions = generate_all_modes(scene.features, model.codebook, model, spec, modes, args.max_len)
            return [c.to_record(scene.image_id, vocab) for c in captions]

        per_image = await map_workers(caption_scene, scenes, args.workers)
        records = [record for group in per_image for record in group]
        write_jsonl(Path(args.out), records)
        used = sorted({r["mode"] for r in records})
        logger.info("wrote %d captions for %d images to %s", len(records), len(scenes), args.out)
        return {
            "status": "success",
            "config": config,
            "output": str(args.out),
            "n_images": len(scenes),
            "n_captions": len(records),
            "modes": used,
            "message": f"Generated {len(records)} captions over {len(used)} modes",
        }
    except Exception as e:
        return error_result(e, config=config)
