"""AdamW with decoupled weight decay, warmup + cosine schedule, global-norm clipping."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, Mapping, Sequence

import numpy as np

from ..autograd import Tensor
from ..errors import CheckpointError, ConfigError
from ..model.params import ParameterStore

logger = logging.getLogger(__name__)

STATE_PREFIX = "optim"


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 2e-4
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    warmup_steps: int = 2000
    total_steps: int = 100_000


def lr_schedule(step: int, base_lr: float, warmup_steps: int, total_steps: int) -> float:
    """Linear warmup to `base_lr`, then cosine decay reaching 0 at `total_steps`."""
    if warmup_steps > 0 and step < warmup_steps:
        return base_lr * (step + 1) / warmup_steps
    span = max(total_steps - warmup_steps, 1)
    progress = min(max((step - warmup_steps) / span, 0.0), 1.0)
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def global_norm(params: Iterable[Tensor]) -> float:
    total = 0.0
    for p in params:
        if p.grad is not None:
            total += float(np.sum(p.grad * p.grad))
    return math.sqrt(total)


def clip_gradients(params: Sequence[Tensor], max_norm: float) -> float:
    """Scale every gradient by max_norm / norm when the global norm exceeds `max_norm`.

    Returns the scale applied (1.0 when untouched).
    """
    if max_norm <= 0:
        raise ConfigError(f"max_norm must be positive, got {max_norm}")
    norm = global_norm(params)
    if norm <= max_norm:
        return 1.0
    scale = max_norm / norm
    for p in params:
        if p.grad is not None:
            p.grad = p.grad * scale
    return scale


class AdamW:
    """Adam with decoupled decay on matrices; vectors and `no_decay` names are not decayed."""

    def __init__(self, store: ParameterStore, cfg: OptimizerConfig, no_decay: Sequence[str] = ()):
        self.store = store
        self.cfg = cfg
        self.no_decay = set(no_decay)
        self.t = 0
        self.m: Dict[str, np.ndarray] = {n: np.zeros_like(p.data) for n, p in store.items()}
        self.v: Dict[str, np.ndarray] = {n: np.zeros_like(p.data) for n, p in store.items()}

    def decays(self, name: str, param: Tensor) -> bool:
        return param.ndim >= 2 and name not in self.no_decay

    def step(self, lr: float) -> None:
        cfg = self.cfg
        self.t += 1
        bias1 = 1.0 - cfg.beta1**self.t
        bias2 = 1.0 - cfg.beta2**self.t
        for name, p in self.store.items():
            g = p.grad if p.grad is not None else np.zeros_like(p.data)
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = (m / bias1) / (np.sqrt(v / bias2) + cfg.eps)
            if self.decays(name, p) and cfg.weight_decay:
                update = update + cfg.weight_decay * p.data
            p.data -= lr * update

    def state_arrays(self) -> Dict[str, np.ndarray]:
        arrays: Dict[str, np.ndarray] = {}
        for name in self.m:
            arrays[f"{STATE_PREFIX}.m.{name}"] = self.m[name].copy()
            arrays[f"{STATE_PREFIX}.v.{name}"] = self.v[name].copy()
        return arrays

    def load_state(self, arrays: Mapping[str, np.ndarray], t: int) -> None:
        for name in self.m:
            for slot, table in (("m", self.m), ("v", self.v)):
                key = f"{STATE_PREFIX}.{slot}.{name}"
                if key not in arrays:
                    raise CheckpointError(f"checkpoint is missing optimizer state '{key}'")
                table[name][...] = arrays[key]
        self.t = int(t)


def optimizer_update(optimizer: AdamW, step: int) -> float:
    """Apply one AdamW update at the scheduled learning rate; returns that rate."""
    cfg = optimizer.cfg
    lr = lr_schedule(step, cfg.learning_rate, cfg.warmup_steps, cfg.total_steps)
    optimizer.step(lr)
    return lr
