"""Model architecture configuration shared by both branches."""

from dataclasses import asdict, dataclass, replace
from typing import Any, Dict

from ..errors import ConfigError
from .transformer import TransformerConfig

ASSIGNMENTS = ("hungarian", "nearest")
CONDITIONINGS = ("add", "prepend")
CDVAE_OBJECTIVES = ("nat", "ar")


@dataclass(frozen=True)
class ModelConfig:
    """Sizes of the four transformer stacks plus the branch switches.

    `mic_updates_codebook` lets MIC gradients reach the codebook through the
    mode vector; by default the vector is detached before entering MIC.
    """

    vocab_size: int = 64
    d_model: int = 32
    n_heads: int = 2
    d_ff: int = 64
    max_len: int = 24
    dropout: float = 0.0
    d_img: int = 32
    k: int = 16
    mode_encoder_layers: int = 1
    masked_decoder_layers: int = 1
    image_encoder_layers: int = 1
    caption_decoder_layers: int = 1
    assignment: str = "hungarian"
    mode_conditioning: str = "add"
    cdvae_objective: str = "nat"
    mic_updates_codebook: bool = False
    use_modes: bool = True

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )
        if self.k < 1:
            raise ConfigError("codebook size k must be at least 1")
        if self.assignment not in ASSIGNMENTS:
            raise ConfigError(f"assignment must be one of {ASSIGNMENTS}, got '{self.assignment}'")
        if self.mode_conditioning not in CONDITIONINGS:
            raise ConfigError(f"mode_conditioning must be one of {CONDITIONINGS}")
        if self.cdvae_objective not in CDVAE_OBJECTIVES:
            raise ConfigError(f"cdvae_objective must be one of {CDVAE_OBJECTIVES}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")

    def stack(self, n_layers: int) -> TransformerConfig:
        return TransformerConfig(
            d_model=self.d_model,
            n_heads=self.n_heads,
            d_ff=self.d_ff,
            n_layers=n_layers,
            max_len=self.max_len,
            dropout=self.dropout,
        )

    def with_updates(self, **changes: Any) -> "ModelConfig":
        return replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
