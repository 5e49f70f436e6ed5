"""Transformer building blocks: embeddings, attention, pre-norm encoder/decoder stacks.

All blocks work on one sequence at a time (2-D `[t x d_model]` tensors).
Masks are boolean matrices where True marks a visible key.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from ..autograd import Tensor
from ..autograd import functional as F
from ..errors import ConfigError, DataError, NumericError, ShapeError
from .params import ParameterStore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TransformerConfig:
    d_model: int
    n_heads: int
    d_ff: int
    n_layers: int
    max_len: int
    dropout: float = 0.0

    def __post_init__(self) -> None:
        if self.d_model % self.n_heads != 0:
            raise ConfigError(
                f"d_model ({self.d_model}) must be divisible by n_heads ({self.n_heads})"
            )

    @property
    def head_dim(self) -> int:
        return self.d_model // self.n_heads


def causal_mask(t: int) -> np.ndarray:
    return np.tril(np.ones((t, t), dtype=bool))


def full_mask(t_q: int, t_k: Optional[int] = None) -> np.ndarray:
    return np.ones((t_q, t_q if t_k is None else t_k), dtype=bool)


def key_padding_mask(t_q: int, pad: Optional[np.ndarray], t_k: int) -> np.ndarray:
    """Visible-key matrix hiding every padded key column."""
    if pad is None:
        return full_mask(t_q, t_k)
    pad = np.asarray(pad, dtype=bool)
    if pad.shape != (t_k,):
        raise ShapeError("key_padding_mask", pad.shape, (t_k,))
    return np.broadcast_to(~pad, (t_q, t_k)).copy()


def multi_head_attention(
    q: Tensor, k: Tensor, v: Tensor, attn_mask: np.ndarray, n_heads: int
) -> Tensor:
    """Scaled dot-product attention over already-projected q, k, v.

    Masked keys get exactly zero weight; a row with no visible key raises
    `NumericError` instead of producing NaN.
    """
    t_q, d = q.shape
    t_k = k.shape[0]
    if k.shape[1] != d or v.shape[0] != t_k:
        raise ShapeError("attention", q.shape, k.shape, v.shape)
    attn_mask = np.asarray(attn_mask, dtype=bool)
    if attn_mask.shape != (t_q, t_k):
        raise ShapeError("attention mask", attn_mask.shape, (t_q, t_k))
    if not np.all(attn_mask.any(axis=1)):
        raise NumericError("attention: a query row has every key masked")

    head_dim = d // n_heads
    scale = 1.0 / np.sqrt(head_dim)
    heads: List[Tensor] = []
    for h in range(n_heads):
        lo, hi = h * head_dim, (h + 1) * head_dim
        qh, kh, vh = F.columns(q, lo, hi), F.columns(k, lo, hi), F.columns(v, lo, hi)
        scores = F.mul(F.matmul(qh, F.transpose(kh)), scale)
        weights = F.softmax(scores, axis=-1, mask=attn_mask)
        heads.append(F.matmul(weights, vh))
    return heads[0] if n_heads == 1 else F.concat(heads, axis=1)


class EmbeddingTable:
    """Token and learned positional embeddings; its token matrix doubles as the tied LM head."""

    def __init__(self, store: ParameterStore, prefix: str, vocab_size: int, cfg: TransformerConfig, rng: np.random.Generator):
        self.vocab_size = vocab_size
        self.cfg = cfg
        self.tokens = store.normal(f"{prefix}.tokens", (vocab_size, cfg.d_model), rng)
        self.positions = store.normal(f"{prefix}.positions", (cfg.max_len, cfg.d_model), rng)
        self.final_gain = store.ones(f"{prefix}.final_norm.gain", (cfg.d_model,))
        self.final_bias = store.zeros(f"{prefix}.final_norm.bias", (cfg.d_model,))
        self.lm_bias = store.zeros(f"{prefix}.lm_head.bias", (vocab_size,))

    def embed(
        self,
        tokens: Sequence[int],
        mode_offset: Optional[Tensor] = None,
        start: int = 0,
    ) -> Tensor:
        """token_emb + pos_emb (+ mode_offset at every position)."""
        ids = np.asarray(tokens, dtype=np.int64)
        t = int(ids.shape[0])
        if t == 0:
            raise DataError("cannot embed an empty sequence")
        if start + t > self.cfg.max_len:
            raise DataError(f"sequence of {t} tokens exceeds max_len {self.cfg.max_len}")
        if ids.min() < 0 or ids.max() >= self.vocab_size:
            raise DataError(f"token id {int(ids.max())} outside vocabulary of {self.vocab_size}")
        x = F.add(F.take(self.tokens, ids), F.take(self.positions, np.arange(start, start + t)))
        if mode_offset is not None:
            x = F.add(x, mode_offset)
        return x

    def position(self, index: int) -> Tensor:
        return F.row(self.positions, index)

    def lm_head(self, hidden: Tensor) -> Tensor:
        """Logits over the vocabulary, weights tied to the token table."""
        return F.add(F.matmul(hidden, F.transpose(self.tokens)), self.lm_bias)

    def final_norm(self, hidden: Tensor) -> Tensor:
        return F.layer_norm(hidden, self.final_gain, self.final_bias)


class AttentionBlock:
    def __init__(self, store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator):
        d = cfg.d_model
        self.n_heads = cfg.n_heads
        self.wq = store.normal(f"{prefix}_wq", (d, d), rng)
        self.wk = store.normal(f"{prefix}_wk", (d, d), rng)
        self.wv = store.normal(f"{prefix}_wv", (d, d), rng)
        self.wo = store.normal(f"{prefix}_wo", (d, d), rng)
        self.bq = store.zeros(f"{prefix}_bq", (d,))
        self.bk = store.zeros(f"{prefix}_bk", (d,))
        self.bv = store.zeros(f"{prefix}_bv", (d,))
        self.bo = store.zeros(f"{prefix}_bo", (d,))

    def __call__(self, x: Tensor, memory: Tensor, mask: np.ndarray) -> Tensor:
        q = F.linear(x, self.wq, self.bq)
        k = F.linear(memory, self.wk, self.bk)
        v = F.linear(memory, self.wv, self.bv)
        return F.linear(multi_head_attention(q, k, v, mask, self.n_heads), self.wo, self.bo)


class FeedForward:
    def __init__(self, store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator):
        self.w1 = store.normal(f"{prefix}_w1", (cfg.d_model, cfg.d_ff), rng)
        self.b1 = store.zeros(f"{prefix}_b1", (cfg.d_ff,))
        self.w2 = store.normal(f"{prefix}_w2", (cfg.d_ff, cfg.d_model), rng)
        self.b2 = store.zeros(f"{prefix}_b2", (cfg.d_model,))

    def __call__(self, x: Tensor) -> Tensor:
        return F.linear(F.gelu(F.linear(x, self.w1, self.b1)), self.w2, self.b2)


class _Norm:
    def __init__(self, store: ParameterStore, prefix: str, d: int):
        self.gain = store.ones(f"{prefix}_gain", (d,))
        self.bias = store.zeros(f"{prefix}_bias", (d,))

    def __call__(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.gain, self.bias)


class EncoderLayer:
    def __init__(self, store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.norm1 = _Norm(store, f"{prefix}.norm1", cfg.d_model)
        self.self_attn = AttentionBlock(store, f"{prefix}.self_attn", cfg, rng)
        self.norm2 = _Norm(store, f"{prefix}.norm2", cfg.d_model)
        self.ffn = FeedForward(store, f"{prefix}.ffn", cfg, rng)

    def __call__(self, x: Tensor, mask: np.ndarray, rng: Optional[np.random.Generator]) -> Tensor:
        h = self.norm1(x)
        x = F.add(x, F.dropout(self.self_attn(h, h, mask), self.cfg.dropout, rng))
        return F.add(x, F.dropout(self.ffn(self.norm2(x)), self.cfg.dropout, rng))


class DecoderLayer:
    def __init__(self, store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.norm1 = _Norm(store, f"{prefix}.norm1", cfg.d_model)
        self.self_attn = AttentionBlock(store, f"{prefix}.self_attn", cfg, rng)
        self.norm2 = _Norm(store, f"{prefix}.norm2", cfg.d_model)
        self.cross_attn = AttentionBlock(store, f"{prefix}.cross_attn", cfg, rng)
        self.norm3 = _Norm(store, f"{prefix}.norm3", cfg.d_model)
        self.ffn = FeedForward(store, f"{prefix}.ffn", cfg, rng)

    def __call__(
        self,
        x: Tensor,
        memory: Tensor,
        self_mask: np.ndarray,
        memory_mask: np.ndarray,
        rng: Optional[np.random.Generator],
    ) -> Tensor:
        h = self.norm1(x)
        x = F.add(x, F.dropout(self.self_attn(h, h, self_mask), self.cfg.dropout, rng))
        x = F.add(x, F.dropout(self.cross_attn(self.norm2(x), memory, memory_mask), self.cfg.dropout, rng))
        return F.add(x, F.dropout(self.ffn(self.norm3(x)), self.cfg.dropout, rng))


class TransformerEncoder:
    def __init__(self, store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.layers = [EncoderLayer(store, f"{prefix}.{i}", cfg, rng) for i in range(cfg.n_layers)]
        if cfg.n_layers:
            self.final = _Norm(store, f"{prefix}.final_norm", cfg.d_model)

    def forward(
        self,
        inputs: Tensor,
        pad_mask: Optional[np.ndarray] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Pre-norm self-attention stack; padded keys are hidden from every query."""
        if not self.layers:
            return inputs
        t = inputs.shape[0]
        mask = key_padding_mask(t, pad_mask, t)
        x = inputs
        for layer in self.layers:
            x = layer(x, mask, rng)
        return self.final(x)


class TransformerDecoder:
    def __init__(self, store: ParameterStore, prefix: str, cfg: TransformerConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.layers = [DecoderLayer(store, f"{prefix}.{i}", cfg, rng) for i in range(cfg.n_layers)]

    def forward(
        self,
        inputs: Tensor,
        memory: Tensor,
        self_mask: np.ndarray,
        memory_pad_mask: Optional[np.ndarray] = None,
        rng: Optional[np.random.Generator] = None,
    ) -> Tensor:
        """Self-attention under `self_mask`, cross-attention over `memory`, feed-forward."""
        t, r = inputs.shape[0], memory.shape[0]
        memory_mask = key_padding_mask(t, memory_pad_mask, r)
        x = inputs
        for layer in self.layers:
            x = layer(x, memory, self_mask, memory_mask, rng)
        return x

