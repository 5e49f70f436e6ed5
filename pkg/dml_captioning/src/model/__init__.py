"""DML Model Package"""

from .codebook import Codebook, init_codebook, nearest_lookup, straight_through, usage_report, vq_losses
from .assignment import ModeAssignment, hungarian_assign
from .config import ModelConfig
from .dml import DMLModel
from .cdvae import MaskingStrategy, apply_masking, cdvae_step, encode_mode, nat_reconstruction_loss
from .mic import (
    DecodeSpec,
    GeneratedCaption,
    GenerationRequest,
    ar_loss,
    beam_decode,
    encode_image,
    generate_all_modes,
    greedy_decode,
)

__all__ = [
    "Codebook",
    "init_codebook",
    "nearest_lookup",
    "straight_through",
    "usage_report",
    "vq_losses",
    "ModeAssignment",
    "hungarian_assign",
    "ModelConfig",
    "DMLModel",
    "MaskingStrategy",
    "apply_masking",
    "cdvae_step",
    "encode_mode",
    "nat_reconstruction_loss",
    "DecodeSpec",
    "GeneratedCaption",
    "GenerationRequest",
    "ar_loss",
    "beam_decode",
    "encode_image",
    "generate_all_modes",
    "greedy_decode",
]
