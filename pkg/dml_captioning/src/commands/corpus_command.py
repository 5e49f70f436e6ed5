"""Synthetic corpus generation command."""

import argparse
import logging
from typing import Any, Dict

from ..config.runtime import get_runtime
from ..data.corpus import family_counts, generate_corpus, write_corpus
from .common import error_result

logger = logging.getLogger(__name__)


def register_corpus_command(subparsers: argparse._SubParsersAction) -> None:
    """Register the `corpus` command."""
    parser = subparsers.add_parser("corpus", help="generate a synthetic multi-reference corpus")
    parser.add_argument("--images", type=int, default=2000, help="number of images")
    parser.add_argument("--caps", type=int, default=5, help="captions per image")
    parser.add_argument("--families", type=int, default=8, help="template families in use")
    parser.add_argument("--objects", type=int, default=24, help="object lexicon size")
    parser.add_argument("--colors", type=int, default=8, help="color lexicon size")
    parser.add_argument("--places", type=int, default=8, help="place lexicon size")
    parser.add_argument("--d-img", type=int, default=32, help="region feature dimension")
    parser.add_argument("--regions", type=int, default=6, help="regions per image")
    parser.add_argument("--min-count", type=int, default=1, help="vocabulary frequency cutoff")
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", required=True, help="output directory")
    parser.set_defaults(handler=cmd_corpus)


async def cmd_corpus(args: argparse.Namespace) -> Dict[str, Any]:
    """
    Generate train/val/test JSONL splits plus vocab.json.

    Args:
        args: Parsed `corpus` arguments

    Returns:
        Dictionary with the written files, split sizes and family balance
    """
    seed = args.seed if args.seed is not None else get_runtime().seed
    config = {
        "images": args.images,
        "caps": args.caps,
        "families": args.families,
        "objects": args.objects,
        "colors": args.colors,
        "places": args.places,
        "d_img": args.d_img,
        "regions": args.regions,
        "min_count": args.min_count,
        "seed": seed,
    }
    try:
        corpus = generate_corpus(
            n_images=args.images,
            n_caps_per_image=args.caps,
            n_families=args.families,
            n_objects=args.objects,
            n_colors=args.colors,
            n_places=args.places,
            d_img=args.d_img,
            n_regions=args.regions,
            seed=seed,
        )
        paths = write_corpus(corpus, args.out, args.min_count)
        sizes = {split: len(scenes) for split, scenes in corpus.splits.items()}
        logger.info("wrote corpus with %d images to %s", args.images, args.out)
        return {
            "status": "success",
            "config": config,
            "files": {name: str(path) for name, path in paths.items()},
            "splits": sizes,
            "family_counts": {str(k): v for k, v in family_counts(corpus.all_scenes()).items()},
            "message": f"Generated {args.images} images with {args.caps} captions each",
        }
    except Exception as e:
        return error_result(e, config=config)
