"""Mode-conditioned image captioning branch.

An image encoder over region features and an autoregressive caption decoder
whose word embeddings are offset by the selected mode embedding.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..autograd import Tensor, no_grad
from ..autograd import functional as F
from ..data.vocab import BOS, EOS, PAD, Vocabulary
from ..errors import ConfigError, DataError
from .codebook import Codebook
from .decoding import Hypothesis, beam_search, greedy_search
from .dml import DMLModel
from .transformer import EmbeddingTable, TransformerDecoder, causal_mask

logger = logging.getLogger(__name__)

BASELINE_MODE = -1


@dataclass(frozen=True)
class DecodeSpec:
    kind: str = "greedy"
    width: int = 1
    length_penalty: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("greedy", "beam"):
            raise ConfigError(f"unknown decode kind '{self.kind}'")
        if self.width < 1:
            raise ConfigError(f"beam width must be >= 1, got {self.width}")

    @classmethod
    def parse(cls, text: str, length_penalty: float = 0.0) -> "DecodeSpec":
        """`greedy` or `beam:<width>`."""
        if text == "greedy":
            return cls("greedy")
        kind, _, width = text.partition(":")
        if kind == "beam" and width.isdigit():
            return cls("beam", int(width), length_penalty)
        raise ConfigError(f"cannot parse decode spec '{text}'")

    def describe(self) -> str:
        return "greedy" if self.kind == "greedy" else f"beam:{self.width}"


@dataclass
class GenerationRequest:
    """One image, one mode. `mode=None` decodes without a mode offset."""

    features: np.ndarray
    mode: Optional[int] = 0
    decode: DecodeSpec = field(default_factory=DecodeSpec)
    max_len: int = 21
    mode_vector: Optional[np.ndarray] = None


@dataclass(frozen=True)
class GeneratedCaption:
    tokens: List[int]
    logprob: float
    mode: int
    truncated: bool = False

    def text(self, vocab: Vocabulary) -> str:
        return vocab.decode(self.tokens)

    def to_record(self, image_id: str, vocab: Vocabulary) -> Dict[str, Any]:
        return {
            "image_id": image_id,
            "mode": self.mode,
            "caption": self.text(vocab),
            "logprob": self.logprob,
        }


def encode_image(features: Any, model: DMLModel, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Region features `[r x d_img]` -> memory `[r x d_model]`; regions carry no positions."""
    x = features if isinstance(features, Tensor) else Tensor(np.asarray(features, dtype=np.float64))
    if x.ndim != 2 or x.shape[0] < 1:
        raise DataError(f"image features must be a non-empty [r x d_img] matrix, got shape {x.shape}")
    if x.shape[1] != model.cfg.d_img:
        raise DataError(f"feature dimension {x.shape[1]} does not match d_img {model.cfg.d_img}")
    projected = F.linear(x, model.image_proj_weight, model.image_proj_bias)
    return model.image_encoder.forward(projected, rng=rng)


def teacher_forcing_logits(
    embedding: EmbeddingTable,
    decoder: TransformerDecoder,
    inputs: Sequence[int],
    q: Optional[Tensor],
    memory: Tensor,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    x = embedding.embed(inputs, mode_offset=q)
    hidden = decoder.forward(x, memory, causal_mask(len(inputs)), rng=rng)
    return embedding.lm_head(embedding.final_norm(hidden))


def teacher_forcing_loss(
    embedding: EmbeddingTable,
    decoder: TransformerDecoder,
    caption: Sequence[int],
    q: Optional[Tensor],
    memory: Tensor,
    smoothing: float,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Smoothed NLL of `caption + [EOS]` given `[BOS] + caption`."""
    if len(caption) == 0:
        raise DataError("cannot score a zero-length caption")
    inputs = [BOS, *caption]
    targets = [*caption, EOS]
    logits = teacher_forcing_logits(embedding, decoder, inputs, q, memory, rng)
    return F.cross_entropy_smoothed(logits, targets, smoothing=smoothing, ignore_id=PAD)


def mic_mode_offset(q: Optional[Tensor], model: DMLModel) -> Optional[Tensor]:
    if q is None:
        return None
    return q if model.cfg.mic_updates_codebook else F.detach(q)


def ar_logits(
    caption: Sequence[int],
    q: Optional[Tensor],
    memory: Tensor,
    model: DMLModel,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Logits `[T+1 x V]` for the inputs `[BOS] + caption`."""
    return teacher_forcing_logits(
        model.caption_embedding, model.caption_decoder, [BOS, *caption], mic_mode_offset(q, model), memory, rng
    )


def ar_loss(
    caption: Sequence[int],
    q: Optional[Tensor],
    memory: Tensor,
    model: DMLModel,
    smoothing: float = 0.1,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Teacher-forced caption loss; `q=None` is the unconditioned captioner."""
    return teacher_forcing_loss(
        model.caption_embedding,
        model.caption_decoder,
        caption,
        mic_mode_offset(q, model),
        memory,
        smoothing,
        rng,
    )


def _resolve_offset(request: GenerationRequest, codebook: Codebook) -> Optional[Tensor]:
    if request.mode_vector is not None:
        return Tensor(np.asarray(request.mode_vector, dtype=np.float64))
    if request.mode is None or request.mode == BASELINE_MODE:
        return None
    if not 0 <= request.mode < codebook.k:
        raise ConfigError(f"mode {request.mode} outside codebook of size {codebook.k}")
    return Tensor(codebook.entries.data[request.mode])


def _step_fn(memory: Tensor, offset: Optional[Tensor], model: DMLModel):
    emb = model.caption_embedding

    def step(prefix: Sequence[int]) -> np.ndarray:
        logits = teacher_forcing_logits(emb, model.caption_decoder, prefix, offset, memory)
        return F.log_softmax(F.row(logits, len(prefix) - 1)).data

    return step


def _run_search(request: GenerationRequest, codebook: Codebook, model: DMLModel, spec: DecodeSpec) -> GeneratedCaption:
    steps = min(request.max_len, model.cfg.max_len)
    with no_grad():
        memory = encode_image(request.features, model)
        offset = _resolve_offset(request, codebook)
        step = _step_fn(memory, offset, model)
        if spec.kind == "greedy":
            hyp = greedy_search(step, BOS, EOS, steps)
        else:
            hyp = beam_search(step, BOS, EOS, spec.width, steps, spec.length_penalty)
    return _to_caption(hyp, request)


def _to_caption(hyp: Hypothesis, request: GenerationRequest) -> GeneratedCaption:
    tokens = list(hyp.tokens[:-1] if hyp.finished else hyp.tokens)
    mode = BASELINE_MODE if request.mode is None else int(request.mode)
    return GeneratedCaption(tokens=tokens, logprob=hyp.logprob, mode=mode, truncated=not hyp.finished)


def greedy_decode(request: GenerationRequest, codebook: Codebook, model: DMLModel) -> GeneratedCaption:
    """Argmax decoding under mode offset `codebook[request.mode]`."""
    return _run_search(request, codebook, model, DecodeSpec("greedy"))


def beam_decode(request: GenerationRequest, codebook: Codebook, model: DMLModel) -> GeneratedCaption:
    spec = request.decode if request.decode.kind == "beam" else DecodeSpec("beam", 1)
    return _run_search(request, codebook, model, spec)


def decode(request: GenerationRequest, codebook: Codebook, model: DMLModel) -> GeneratedCaption:
    if request.decode.kind == "greedy":
        return greedy_decode(request, codebook, model)
    return beam_decode(request, codebook, model)


def generate_all_modes(
    features: np.ndarray,
    codebook: Codebook,
    model: DMLModel,
    spec: Optional[DecodeSpec] = None,
    modes: Optional[Sequence[int]] = None,
    max_len: int = 21,
) -> List[GeneratedCaption]:
    """One caption per effective mode (or per listed mode), ordered by mode index.

    A model trained without modes yields a single caption tagged mode -1.
    """
    spec = spec or DecodeSpec()
    if not model.cfg.use_modes:
        return [decode(GenerationRequest(features, None, spec, max_len), codebook, model)]
    selected = sorted(set(modes)) if modes is not None else codebook.effective_modes()
    return [decode(GenerationRequest(features, m, spec, max_len), codebook, model) for m in selected]
