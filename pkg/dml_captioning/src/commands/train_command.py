"""Joint DML training command."""

import argparse
import asyncio
import logging
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict

from ..config.run_config import build_run_config
from ..config.runtime import get_runtime
from ..data.dataset import check_vocabulary, encode_scenes, load_dataset
from ..data.vocab import Vocabulary
from ..training.trainer import run_training
from .common import error_result, resolve_split

logger = logging.getLogger(__name__)


def register_train_command(subparsers: argparse._SubParsersAction) -> None:
    """Register the `train` command."""
    parser = subparsers.add_parser("train", help="train the CdVAE and MIC branches jointly")
    parser.add_argument("--preset", choices=["full", "desk"], default=None)
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--data", required=True, help="corpus directory (train.jsonl + vocab.json)")
    parser.add_argument("--out", required=True, help="run directory")
    parser.add_argument("--assign", choices=["hungarian", "nearest"], default=None)
    parser.add_argument("--mask", default=None, help="full | fixed:<p> | linear:<p_start>:<p_end>")
    parser.add_argument("--k", type=int, default=None, help="codebook size")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--steps", type=int, default=None, help="total optimizer steps")
    parser.add_argument("--batch", type=int, default=None, help="images per batch")
    parser.add_argument("--mic-caps", type=int, default=None, help="captions sampled per image for MIC")
    parser.add_argument("--lr", type=float, default=None)
    parser.add_argument("--cdvae-objective", choices=["nat", "ar"], default=None)
    parser.add_argument("--conditioning", choices=["add", "prepend"], default=None)
    parser.add_argument("--mic-updates-codebook", action="store_true", default=None)
    parser.add_argument("--baseline", action="store_true", help="train MIC alone without modes")
    parser.add_argument("--checkpoint-every", type=int, default=None)
    parser.add_argument("--resume", default=None, help="checkpoint directory to continue from")
    parser.set_defaults(handler=cmd_train)


def run_config_from_args(args: argparse.Namespace):
    seed = args.seed if args.seed is not None else get_runtime().seed
    overrides = {
        "model.assignment": args.assign,
        "model.k": args.k,
        "model.cdvae_objective": args.cdvae_objective,
        "model.mode_conditioning": args.conditioning,
        "model.mic_updates_codebook": args.mic_updates_codebook,
        "model.use_modes": False if args.baseline else None,
        "train.masking": args.mask,
        "train.seed": seed,
        "train.total_steps": args.steps,
        "train.images_per_batch": args.batch,
        "train.sampled_caps_per_image": args.mic_caps,
        "train.learning_rate": args.lr,
        "train.checkpoint_every": args.checkpoint_every,
    }
    return build_run_config(
        preset=args.preset,
        config_file=Path(args.config) if args.config else None,
        overrides=overrides,
        paths={"data": args.data, "out": args.out, "resume": args.resume},
    )


async def cmd_train(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Train a DML model on a corpus directory.

    Args:
        args: Parsed `train` arguments

    Returns:
        Dictionary with the final checkpoint, step count, usage and effective config
    """
    try:
        run_config = run_config_from_args(args)
    except Exception as e:
        return error_result(e)

    try:
        vocab = Vocabulary.load(Path(args.data) / "vocab.json")
        scenes = load_dataset(resolve_split(args.data, "train"), d_img=run_config.model.d_img)
        check_vocabulary(scenes, vocab)
        model_cfg = run_config.model.with_updates(vocab_size=len(vocab))
        run_config = replace(run_config, model=model_cfg)

        logger.info("training %s preset on %d images", run_config.preset, len(scenes))
        result = await asyncio.to_thread(
            run_training,
            encode_scenes(scenes, vocab),
            model_cfg,
            run_config.train,
            Path(args.out),
            vocab,
            run_config.checkpoint_extras(),
            Path(args.resume) if args.resume else None,
        )
        return {
            "status": "success",
            "config": run_config.to_dict(),
            "checkpoint": str(result.checkpoint),
            "steps": result.steps,
            "final_metrics": result.final_metrics,
            "usage": result.usage,
            "log": str(result.log_path),
            "message": f"Trained {result.steps} steps; {result.usage['effective_modes']} effective modes",
        }
    except Exception as e:
        return error_result(e, config=run_config.to_dict())
