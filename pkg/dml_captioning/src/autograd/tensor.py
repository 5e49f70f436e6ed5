"""Reverse-mode automatic differentiation over dense float64 tensors.

A `Tensor` wraps a numpy array. Differentiable operations subclass `Function`;
`Function.apply` runs the forward pass on raw arrays and, when gradients are
enabled, links the output to its creator so `Tensor.backward` can walk the
graph in reverse creation order.
"""

import itertools
import logging
import threading
import weakref
from contextlib import contextmanager
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import GraphError, NumericError

logger = logging.getLogger(__name__)

DTYPE = np.float64

ArrayLike = Union[np.ndarray, float, int, Sequence[float], Sequence[Sequence[float]]]

_node_ids = itertools.count()
_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


@contextmanager
def no_grad() -> Iterator[None]:
    """Disable graph recording for the current thread."""
    previous = is_grad_enabled()
    _state.grad_enabled = False
    try:
        yield
    finally:
        _state.grad_enabled = previous


class Function:
    """Base class for differentiable operations.

    Subclasses implement `forward` on numpy arrays and `backward`, which maps
    the gradient of the output to one gradient (or None) per input.
    """

    def __init__(self, *inputs: "Tensor"):
        self.inputs = inputs
        self.node_id = next(_node_ids)
        self.consumed = False
        self.saved: Dict[str, Any] = {}
        self._output: Optional["weakref.ReferenceType[Tensor]"] = None

    def forward(self, *arrays: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError(f"{type(self).__name__} has no forward pass")

    def backward(self, grad: np.ndarray) -> Tuple[Optional[np.ndarray], ...]:
        raise NotImplementedError(f"{type(self).__name__} has no backward pass")

    @classmethod
    def apply(cls, *inputs: "Tensor", **kwargs: Any) -> "Tensor":
        func = cls(*inputs)
        out_data = func.forward(*(t.data for t in inputs), **kwargs)
        requires_grad = is_grad_enabled() and any(t.requires_grad for t in inputs)
        if not requires_grad:
            return Tensor(out_data)
        out = Tensor(out_data, requires_grad=True, _creator=func)
        func._output = weakref.ref(out)
        return out

    def release(self) -> None:
        self.consumed = True
        self.saved = {}


class Tensor:
    """Dense float64 array participating in a reverse-mode graph."""

    __array_priority__ = 100

    def __init__(
        self,
        data: ArrayLike,
        requires_grad: bool = False,
        _creator: Optional[Function] = None,
    ):
        self.data = np.asarray(data, dtype=DTYPE)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.creator = _creator

    # -- basic properties -------------------------------------------------

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self.creator is None

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.size != 1:
            raise GraphError(f"item() needs a single element, got shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        """Same values, no gradient path."""
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    def __len__(self) -> int:
        return self.shape[0]

    # -- operators ----------------------------------------------------------

    def __add__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.add(self, other)

    __radd__ = __add__

    def __sub__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.sub(self, other)

    def __rsub__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.sub(as_tensor(other), self)

    def __mul__(self, other: Any) -> "Tensor":
        from . import functional as F

        return F.mul(self, other)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        from . import functional as F

        return F.mul(self, -1.0)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import functional as F

        return F.matmul(self, other)

    def sum(self, axis: Optional[int] = None) -> "Tensor":
        from . import functional as F

        return F.sum(self, axis=axis)

    def mean(self) -> "Tensor":
        from . import functional as F

        return F.mean(self)

    def reshape(self, *shape: int) -> "Tensor":
        from . import functional as F

        return F.reshape(self, shape)

    @property
    def T(self) -> "Tensor":
        from . import functional as F

        return F.transpose(self)

    # -- differentiation ----------------------------------------------------

    def backward(self) -> None:
        """Populate `.grad` on every reachable tensor that requires gradients."""
        if self.size != 1:
            raise GraphError(f"backward() needs a scalar loss, got shape {self.shape}")
        if not self.requires_grad:
            raise GraphError("backward() on a tensor that does not require gradients")
        if self.creator is None:
            self.grad = np.ones_like(self.data)
            return
        if self.creator.consumed:
            raise GraphError("graph already consumed by a previous backward pass")

        graph = Graph.trace(self)
        pending: Dict[int, np.ndarray] = {self.creator.node_id: np.ones_like(self.data)}
        for func in graph.nodes:
            grad = pending.pop(func.node_id, None)
            if grad is None:
                func.release()
                continue
            out = func._output() if func._output is not None else None
            if out is not None:
                out.grad = grad
            input_grads = func.backward(grad)
            for tensor, g in zip(func.inputs, input_grads):
                if g is None or not tensor.requires_grad:
                    continue
                if g.shape != tensor.shape:
                    g = g.reshape(tensor.shape)
                if tensor.creator is not None and not tensor.creator.consumed:
                    key = tensor.creator.node_id
                    pending[key] = pending[key] + g if key in pending else g
                elif tensor.creator is None:
                    tensor.grad = g.copy() if tensor.grad is None else tensor.grad + g
            func.release()
        logger.debug("backward pass over %d nodes", len(graph.nodes))


class Graph:
    """Operation records reachable from one output, in reverse topological order.

    Node ids are drawn from a global counter when an operation is created, so an
    operation's inputs always carry smaller ids than the operation itself.
    """

    def __init__(self, nodes: List[Function]):
        self.nodes = nodes

    @classmethod
    def trace(cls, output: Tensor) -> "Graph":
        seen: Dict[int, Function] = {}
        stack = [output.creator] if output.creator is not None else []
        while stack:
            func = stack.pop()
            if func is None or func.node_id in seen:
                continue
            if func.consumed:
                raise GraphError("graph already consumed by a previous backward pass")
            seen[func.node_id] = func
            for tensor in func.inputs:
                if tensor.creator is not None and tensor.creator.node_id not in seen:
                    stack.append(tensor.creator)
        ordered = sorted(seen.values(), key=lambda f: f.node_id, reverse=True)
        return cls(ordered)

    def __len__(self) -> int:
        return len(self.nodes)


def as_tensor(value: Any) -> Tensor:
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def parameter(data: ArrayLike) -> Tensor:
    """Leaf tensor that requires gradients."""
    return Tensor(data, requires_grad=True)


def check_finite(array: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(array)):
        raise NumericError(f"{op}: non-finite input")
