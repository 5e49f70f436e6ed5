"""Named parameter storage.

Tensor names follow `<branch>.<component>.<layer>.<tensor>`, e.g.
`cdvae.mode_encoder.0.self_attn_wq`.
"""

import logging
from typing import Dict, Iterator, Mapping, Tuple

import numpy as np

from ..autograd import Tensor, parameter
from ..errors import CheckpointError

logger = logging.getLogger(__name__)

INIT_STD = 0.02


class ParameterStore:
    """Ordered registry of trainable leaf tensors."""

    def __init__(self) -> None:
        self._params: Dict[str, Tensor] = {}

    def normal(self, name: str, shape: Tuple[int, ...], rng: np.random.Generator, std: float = INIT_STD) -> Tensor:
        return self._register(name, rng.normal(0.0, std, size=shape))

    def zeros(self, name: str, shape: Tuple[int, ...]) -> Tensor:
        return self._register(name, np.zeros(shape))

    def ones(self, name: str, shape: Tuple[int, ...]) -> Tensor:
        return self._register(name, np.ones(shape))

    def add(self, name: str, tensor: Tensor) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name '{name}'")
        tensor.requires_grad = True
        self._params[name] = tensor
        return tensor

    def _register(self, name: str, data: np.ndarray) -> Tensor:
        return self.add(name, parameter(data))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def items(self) -> Iterator[Tuple[str, Tensor]]:
        return iter(self._params.items())

    def names(self) -> list[str]:
        return list(self._params)

    def with_prefix(self, prefix: str) -> Dict[str, Tensor]:
        return {n: t for n, t in self._params.items() if n.startswith(prefix)}

    def zero_grad(self) -> None:
        for tensor in self._params.values():
            tensor.zero_grad()

    def count(self) -> int:
        return int(sum(t.size for t in self._params.values()))

    def arrays(self) -> Dict[str, np.ndarray]:
        return {n: t.data.copy() for n, t in self._params.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        missing = [n for n in self._params if n not in arrays]
        if missing:
            raise CheckpointError(f"checkpoint is missing parameters: {missing[:5]}")
        for name, tensor in self._params.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != tensor.shape:
                raise CheckpointError(
                    f"parameter '{name}' has shape {value.shape}, expected {tensor.shape}"
                )
            tensor.data[...] = value
