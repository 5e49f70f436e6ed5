"""The joint DML model: CdVAE branch, MIC branch and the codebook joining them."""

import logging
from typing import Dict

import numpy as np

from ..autograd import Tensor
from .codebook import Codebook, init_codebook
from .config import ModelConfig
from .params import ParameterStore
from .transformer import EmbeddingTable, TransformerDecoder, TransformerEncoder

logger = logging.getLogger(__name__)

CODEBOOK_PARAM = "codebook.entries"


class DMLModel:
    """Parameter-owning container for the four transformer stacks and the codebook.

    Parameters are created in a fixed order from one seeded generator, so a
    given (config, seed) pair always yields the same initial weights.
    """

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        self.cfg = cfg
        self.seed = seed
        self.store = ParameterStore()
        rng = np.random.default_rng(seed)
        plain = cfg.stack(0)

        self.cdvae_embedding = EmbeddingTable(self.store, "cdvae.embed", cfg.vocab_size, plain, rng)
        self.mode_encoder = TransformerEncoder(
            self.store, "cdvae.mode_encoder", cfg.stack(cfg.mode_encoder_layers), rng
        )
        self.masked_decoder = TransformerDecoder(
            self.store, "cdvae.masked_decoder", cfg.stack(cfg.masked_decoder_layers), rng
        )

        self.image_proj_weight = self.store.normal(
            "mic.image_encoder.proj.weight", (cfg.d_img, cfg.d_model), rng
        )
        self.image_proj_bias = self.store.zeros("mic.image_encoder.proj.bias", (cfg.d_model,))
        self.image_encoder = TransformerEncoder(
            self.store, "mic.image_encoder", cfg.stack(cfg.image_encoder_layers), rng
        )
        self.caption_embedding = EmbeddingTable(self.store, "mic.embed", cfg.vocab_size, plain, rng)
        self.caption_decoder = TransformerDecoder(
            self.store, "mic.caption_decoder", cfg.stack(cfg.caption_decoder_layers), rng
        )

        self.codebook: Codebook = init_codebook(cfg.k, cfg.d_model, seed + 1)
        self.store.add(CODEBOOK_PARAM, self.codebook.entries)
        logger.debug("initialized DML model with %d parameters", self.store.count())

    def image_encoder_params(self) -> Dict[str, Tensor]:
        return self.store.with_prefix("mic.image_encoder")

    def zero_grad(self) -> None:
        self.store.zero_grad()
