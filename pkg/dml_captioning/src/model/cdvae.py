"""Image-conditioned discrete VAE branch.

The mode encoder reads `[MODE] + caption` and returns the hidden state at the
`[MODE]` position. Captions are matched to codebook entries, and the masked
decoder reconstructs every caption token from (mode vector, image memory,
a row of `[MASK]` inputs).
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..autograd import Tensor
from ..autograd import functional as F
from ..data.vocab import MASK, MODE, PAD
from ..errors import AssignmentError, ConfigError, DataError
from .assignment import ModeAssignment
from .codebook import DEFAULT_BETA, Codebook, straight_through, vq_losses
from .dml import DMLModel
from .transformer import full_mask

logger = logging.getLogger(__name__)

SeedLike = Union[int, Sequence[int]]


@dataclass(frozen=True)
class MaskingStrategy:
    """Decoder input masking: `full`, `fixed_prob` (p) or `linear_schedule` (p_start -> p_end)."""

    kind: str = "full"
    p_start: float = 1.0
    p_end: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("full", "fixed_prob", "linear_schedule"):
            raise ConfigError(f"unknown masking strategy '{self.kind}'")
        for p in (self.p_start, self.p_end):
            if not 0.0 <= p <= 1.0:
                raise ConfigError(f"masking probability {p} outside [0, 1]")

    @classmethod
    def parse(cls, text: str) -> "MaskingStrategy":
        """`full`, `fixed:<p>` or `linear:<p_start>:<p_end>`."""
        parts = text.strip().split(":")
        try:
            if parts[0] == "full" and len(parts) == 1:
                return cls("full")
            if parts[0] == "fixed" and len(parts) == 2:
                p = float(parts[1])
                return cls("fixed_prob", p, p)
            if parts[0] == "linear" and len(parts) == 3:
                return cls("linear_schedule", float(parts[1]), float(parts[2]))
        except ValueError:
            pass
        raise ConfigError(f"cannot parse masking strategy '{text}'")

    def describe(self) -> str:
        if self.kind == "full":
            return "full"
        if self.kind == "fixed_prob":
            return f"fixed:{self.p_start}"
        return f"linear:{self.p_start}:{self.p_end}"

    def probability(self, step: int, total_steps: int) -> float:
        if self.kind == "full":
            return 1.0
        if self.kind == "fixed_prob":
            return self.p_start
        frac = min(max(step / max(total_steps, 1), 0.0), 1.0)
        return self.p_start + (self.p_end - self.p_start) * frac


@dataclass(frozen=True)
class CdvaeSettings:
    beta: float = DEFAULT_BETA
    label_smoothing: float = 0.1
    masking: MaskingStrategy = MaskingStrategy()


@dataclass
class CdvaeLosses:
    """Per-image loss terms, each summed over the image's captions."""

    reconstruction: Tensor
    codebook: Tensor
    commitment: Tensor
    n_captions: int

    @property
    def total(self) -> Tensor:
        return F.add(F.add(self.reconstruction, self.codebook), self.commitment)


def encode_mode(caption: Sequence[int], model: DMLModel, rng: Optional[np.random.Generator] = None) -> Tensor:
    """e(y): last-layer hidden state at the `[MODE]` position."""
    if len(caption) == 0:
        raise DataError("cannot encode an empty caption")
    if len(caption) + 1 > model.cfg.max_len:
        raise DataError(f"caption of {len(caption)} tokens exceeds max_len - 1 = {model.cfg.max_len - 1}")
    x = model.cdvae_embedding.embed([MODE, *caption])
    hidden = model.mode_encoder.forward(x, rng=rng)
    return F.row(hidden, 0)


def apply_masking(
    caption: Sequence[int],
    strategy: MaskingStrategy,
    step: int,
    total_steps: int,
    seed: SeedLike,
) -> np.ndarray:
    """Decoder input ids: each position becomes `[MASK]` with the strategy's probability."""
    ids = np.asarray(caption, dtype=np.int64)
    if strategy.kind == "full":
        return np.full_like(ids, MASK)
    p = strategy.probability(step, total_steps)
    rng = np.random.default_rng(seed)
    masked = rng.random(ids.shape[0]) < p
    return np.where(masked, MASK, ids)


def masked_decoder_logits(
    decoder_inputs: Sequence[int],
    q: Tensor,
    image_memory: Tensor,
    model: DMLModel,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Masked-decoder logits `[T x V]`; every position sees every other position."""
    emb = model.cdvae_embedding
    t = len(decoder_inputs)
    if model.cfg.mode_conditioning == "add":
        x = emb.embed(decoder_inputs, mode_offset=q)
        hidden = model.masked_decoder.forward(x, image_memory, full_mask(t), rng=rng)
    else:
        lead = F.reshape(F.add(q, emb.position(0)), (1, q.shape[0]))
        x = F.concat([lead, emb.embed(decoder_inputs, start=1)], axis=0)
        hidden = model.masked_decoder.forward(x, image_memory, full_mask(t + 1), rng=rng)
        hidden = F.rows(hidden, 1, t + 1)
    return emb.lm_head(emb.final_norm(hidden))


def nat_reconstruction_loss(
    caption: Sequence[int],
    q: Tensor,
    image_memory: Tensor,
    model: DMLModel,
    smoothing: float = 0.1,
    decoder_inputs: Optional[Sequence[int]] = None,
    rng: Optional[np.random.Generator] = None,
) -> Tensor:
    """Conditionally independent reconstruction of all T tokens.

    The image memory is detached: this loss never reaches the image encoder.
    Reference tokens enter only as targets unless a masking strategy leaves
    some of them visible in `decoder_inputs`.
    """
    if len(caption) == 0:
        raise DataError("cannot reconstruct a zero-length caption")
    inputs = [MASK] * len(caption) if decoder_inputs is None else list(decoder_inputs)
    logits = masked_decoder_logits(inputs, q, F.detach(image_memory), model, rng)
    return F.cross_entropy_smoothed(logits, caption, smoothing=smoothing, ignore_id=PAD)


def _reconstruction_loss(
    caption: Sequence[int],
    q: Tensor,
    memory: Tensor,
    model: DMLModel,
    settings: CdvaeSettings,
    inputs: np.ndarray,
    rng: Optional[np.random.Generator],
) -> Tensor:
    if model.cfg.cdvae_objective == "ar":
        from .mic import teacher_forcing_loss

        return teacher_forcing_loss(
            model.cdvae_embedding,
            model.masked_decoder,
            caption,
            q,
            F.detach(memory),
            settings.label_smoothing,
            rng,
        )
    return nat_reconstruction_loss(
        caption, q, memory, model, settings.label_smoothing, decoder_inputs=inputs, rng=rng
    )


def cdvae_step(
    captions: Sequence[Sequence[int]],
    image_memory: Tensor,
    codebook: Codebook,
    model: DMLModel,
    settings: CdvaeSettings,
    step: int = 0,
    total_steps: int = 1,
    seed: SeedLike = 0,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[CdvaeLosses, ModeAssignment]:
    """Encode all captions of one image, assign modes, and build the CdVAE loss terms.

    Usage counts are left alone; the trainer records the returned assignment
    once the step has been applied.
    """
    n = len(captions)
    if model.cfg.assignment == "hungarian" and n > codebook.k:
        raise AssignmentError(f"{n} captions per image but only {codebook.k} codebook entries")
    memory = F.detach(image_memory)
    embeddings = [encode_mode(c, model, rng) for c in captions]
    assignment = codebook.assign(np.stack([e.data for e in embeddings]), model.cfg.assignment)

    seed_parts = [int(s) for s in np.atleast_1d(seed)]
    recon_terms: List[Tensor] = []
    codebook_terms: List[Tensor] = []
    commit_terms: List[Tensor] = []
    for i, (caption, e) in enumerate(zip(captions, embeddings)):
        q = codebook.lookup(assignment.entry_for(i))
        inputs = apply_masking(caption, settings.masking, step, total_steps, seed_parts + [i])
        recon_terms.append(
            _reconstruction_loss(caption, straight_through(e, q), memory, model, settings, inputs, rng)
        )
        cb, commit = vq_losses(e, q, settings.beta)
        codebook_terms.append(cb)
        commit_terms.append(commit)

    losses = CdvaeLosses(
        reconstruction=_total(recon_terms),
        codebook=_total(codebook_terms),
        commitment=_total(commit_terms),
        n_captions=n,
    )
    return losses, assignment


def _total(terms: List[Tensor]) -> Tensor:
    out = terms[0]
    for term in terms[1:]:
        out = F.add(out, term)
    return out
