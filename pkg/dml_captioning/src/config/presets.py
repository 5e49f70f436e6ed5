"""Named model/training presets."""

from typing import Any, Dict

from ..errors import ConfigError

PRESETS: Dict[str, Dict[str, Dict[str, Any]]] = {
    "full": {
        "model": {
            "d_model": 768,
            "n_heads": 12,
            "d_ff": 3072,
            "max_len": 24,
            "dropout": 0.1,
            "d_img": 2048,
            "k": 64,
            "mode_encoder_layers": 6,
            "masked_decoder_layers": 2,
            "image_encoder_layers": 6,
            "caption_decoder_layers": 6,
        },
        "train": {
            "total_steps": 100_000,
            "images_per_batch": 64,
            "sampled_caps_per_image": 1,
            "learning_rate": 2e-4,
            "weight_decay": 0.01,
            "warmup_steps": 2000,
            "grad_clip_norm": 1.0,
            "label_smoothing": 0.1,
            "beta": 0.25,
            "checkpoint_every": 10_000,
        },
    },
    "desk": {
        "model": {
            "d_model": 32,
            "n_heads": 2,
            "d_ff": 64,
            "max_len": 24,
            "dropout": 0.0,
            "d_img": 32,
            "k": 16,
            "mode_encoder_layers": 1,
            "masked_decoder_layers": 1,
            "image_encoder_layers": 1,
            "caption_decoder_layers": 1,
        },
        "train": {
            "total_steps": 1500,
            "images_per_batch": 8,
            "sampled_caps_per_image": 1,
            "learning_rate": 2e-3,
            "weight_decay": 0.01,
            "warmup_steps": 100,
            "grad_clip_norm": 1.0,
            "label_smoothing": 0.1,
            "beta": 0.25,
            "checkpoint_every": 500,
        },
    },
}


def preset_defaults(name: str) -> Dict[str, Dict[str, Any]]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}'; choose from {sorted(PRESETS)}")
    return {section: dict(values) for section, values in PRESETS[name].items()}
