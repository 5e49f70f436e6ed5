"""Differentiable operations.

Broadcasting is deliberately narrow: element-wise binary ops accept operands
of equal shape, a scalar operand, or a vector matching the last axis of the
other operand (bias add).
"""

from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import erf

from ..errors import NumericError, ShapeError
from .tensor import DTYPE, Function, Tensor, as_tensor, check_finite

LAYER_NORM_EPS = 1e-5
_SQRT2 = np.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / np.sqrt(2.0 * np.pi)


def _check_broadcast(op: str, a: np.ndarray, b: np.ndarray) -> None:
    if a.shape == b.shape or a.ndim == 0 or b.ndim == 0:
        return
    if b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0]:
        return
    if a.ndim == 1 and b.ndim >= 1 and b.shape[-1] == a.shape[0]:
        return
    raise ShapeError(op, a.shape, b.shape)


def _reduce_to(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    if len(shape) == 0:
        return np.asarray(grad.sum(), dtype=DTYPE)
    return grad.reshape(-1, shape[0]).sum(axis=0)


class Add(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast("add", a, b)
        self.saved["shapes"] = (a.shape, b.shape)
        return a + b

    def backward(self, grad: np.ndarray):
        a_shape, b_shape = self.saved["shapes"]
        return _reduce_to(grad, a_shape), _reduce_to(grad, b_shape)


class Sub(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast("sub", a, b)
        self.saved["shapes"] = (a.shape, b.shape)
        return a - b

    def backward(self, grad: np.ndarray):
        a_shape, b_shape = self.saved["shapes"]
        return _reduce_to(grad, a_shape), _reduce_to(-grad, b_shape)


class Mul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        _check_broadcast("mul", a, b)
        self.saved["a"], self.saved["b"] = a, b
        return a * b

    def backward(self, grad: np.ndarray):
        a, b = self.saved["a"], self.saved["b"]
        return _reduce_to(grad * b, a.shape), _reduce_to(grad * a, b.shape)


class MatMul(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError("matmul", a.shape, b.shape)
        self.saved["a"], self.saved["b"] = a, b
        return a @ b

    def backward(self, grad: np.ndarray):
        a, b = self.saved["a"], self.saved["b"]
        return grad @ b.T, a.T @ grad


class Transpose(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2:
            raise ShapeError("transpose", x.shape)
        return x.T.copy()

    def backward(self, grad: np.ndarray):
        return (grad.T.copy(),)


class Sum(Function):
    def forward(self, x: np.ndarray, axis: Optional[int] = None) -> np.ndarray:
        self.saved["shape"], self.saved["axis"] = x.shape, axis
        return np.asarray(x.sum(axis=axis), dtype=DTYPE)

    def backward(self, grad: np.ndarray):
        shape, axis = self.saved["shape"], self.saved["axis"]
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, shape).copy(),)


class Reshape(Function):
    def forward(self, x: np.ndarray, shape: Tuple[int, ...] = ()) -> np.ndarray:
        self.saved["shape"] = x.shape
        try:
            return x.reshape(shape).copy()
        except ValueError:
            raise ShapeError("reshape", x.shape, shape)

    def backward(self, grad: np.ndarray):
        return (grad.reshape(self.saved["shape"]),)


class Take(Function):
    """Row gather `table[ids]` (embedding lookup)."""

    def forward(self, table: np.ndarray, ids: Optional[np.ndarray] = None) -> np.ndarray:
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
            raise ShapeError("take", table.shape, ids.shape)
        self.saved["ids"], self.saved["shape"] = ids, table.shape
        return table[ids]

    def backward(self, grad: np.ndarray):
        out = np.zeros(self.saved["shape"], dtype=DTYPE)
        np.add.at(out, self.saved["ids"], grad)
        return (out,)


class Index(Function):
    """Basic slicing `x[index]` with slices and integers only."""

    def forward(self, x: np.ndarray, index: Any = None) -> np.ndarray:
        self.saved["index"], self.saved["shape"] = index, x.shape
        return np.array(x[index], dtype=DTYPE)

    def backward(self, grad: np.ndarray):
        out = np.zeros(self.saved["shape"], dtype=DTYPE)
        out[self.saved["index"]] = grad
        return (out,)


class Concat(Function):
    def forward(self, *arrays: np.ndarray, axis: int = 0) -> np.ndarray:
        try:
            out = np.concatenate(arrays, axis=axis)
        except ValueError:
            raise ShapeError("concat", *(a.shape for a in arrays))
        self.saved["bounds"] = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        self.saved["axis"] = axis
        return out

    def backward(self, grad: np.ndarray):
        return tuple(np.split(grad, self.saved["bounds"], axis=self.saved["axis"]))


class Stack(Function):
    def forward(self, *arrays: np.ndarray) -> np.ndarray:
        if len({a.shape for a in arrays}) != 1:
            raise ShapeError("stack", *(a.shape for a in arrays))
        return np.stack(arrays, axis=0)

    def backward(self, grad: np.ndarray):
        return tuple(grad[i] for i in range(grad.shape[0]))


class Softmax(Function):
    def forward(self, x: np.ndarray, axis: int = -1, mask: Optional[np.ndarray] = None) -> np.ndarray:
        check_finite(x, "softmax")
        if x.ndim == 0 or x.shape[axis] < 1:
            raise ShapeError("softmax", x.shape)
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != x.shape:
                raise ShapeError("softmax mask", x.shape, mask.shape)
            if not np.all(mask.any(axis=axis)):
                raise NumericError("softmax: a row is fully masked")
            x = np.where(mask, x, -np.inf)
        shifted = x - x.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        y = e / e.sum(axis=axis, keepdims=True)
        self.saved["y"], self.saved["axis"] = y, axis
        return y

    def backward(self, grad: np.ndarray):
        y, axis = self.saved["y"], self.saved["axis"]
        return (y * (grad - (grad * y).sum(axis=axis, keepdims=True)),)


class LogSoftmax(Function):
    def forward(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        check_finite(x, "log_softmax")
        shifted = x - x.max(axis=axis, keepdims=True)
        out = shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
        self.saved["out"], self.saved["axis"] = out, axis
        return out

    def backward(self, grad: np.ndarray):
        out, axis = self.saved["out"], self.saved["axis"]
        return (grad - np.exp(out) * grad.sum(axis=axis, keepdims=True),)


class LayerNorm(Function):
    def forward(
        self, x: np.ndarray, gain: np.ndarray, bias: np.ndarray, eps: float = LAYER_NORM_EPS
    ) -> np.ndarray:
        d = x.shape[-1]
        if d < 1 or gain.shape != (d,) or bias.shape != (d,):
            raise ShapeError("layer_norm", x.shape, gain.shape, bias.shape)
        mu = x.mean(axis=-1, keepdims=True)
        var = ((x - mu) ** 2).mean(axis=-1, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = (x - mu) * inv
        self.saved.update(xhat=xhat, inv=inv, gain=gain)
        return xhat * gain + bias

    def backward(self, grad: np.ndarray):
        xhat, inv, gain = self.saved["xhat"], self.saved["inv"], self.saved["gain"]
        dxhat = grad * gain
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        d = xhat.shape[-1]
        dgain = (grad * xhat).reshape(-1, d).sum(axis=0)
        dbias = grad.reshape(-1, d).sum(axis=0)
        return dx, dgain, dbias


class Gelu(Function):
    """Exact GELU, x * Phi(x)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        cdf = 0.5 * (1.0 + erf(x / _SQRT2))
        self.saved["x"], self.saved["cdf"] = x, cdf
        return x * cdf

    def backward(self, grad: np.ndarray):
        x, cdf = self.saved["x"], self.saved["cdf"]
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (grad * (cdf + x * pdf),)


class CrossEntropySmoothed(Function):
    """Mean label-smoothed NLL over non-ignored positions.

    The smoothed target puts (1 - s) on the reference token and s / V on every
    vocabulary entry.
    """

    def forward(
        self,
        logits: np.ndarray,
        targets: Optional[np.ndarray] = None,
        smoothing: float = 0.0,
        ignore_id: Optional[int] = None,
    ) -> np.ndarray:
        targets = np.asarray(targets, dtype=np.int64)
        if logits.ndim != 2 or targets.shape != (logits.shape[0],):
            raise ShapeError("cross_entropy", logits.shape, targets.shape)
        check_finite(logits, "cross_entropy")
        t, vocab = logits.shape
        keep = np.ones(t, dtype=bool) if ignore_id is None else targets != ignore_id
        count = int(keep.sum())
        if count == 0:
            raise NumericError("cross_entropy: every position is ignored (empty batch)")
        if np.any(targets[keep] >= vocab) or np.any(targets[keep] < 0):
            raise ShapeError("cross_entropy targets", logits.shape, (int(targets.max()) + 1,))

        shifted = logits - logits.max(axis=-1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        soft = np.full((t, vocab), smoothing / vocab, dtype=DTYPE)
        rows = np.nonzero(keep)[0]
        soft[rows, targets[keep]] += 1.0 - smoothing
        per_position = -(soft * logp).sum(axis=-1)
        self.saved.update(probs=np.exp(logp), soft=soft, keep=keep, count=count)
        return np.asarray(per_position[keep].sum() / count, dtype=DTYPE)

    def backward(self, grad: np.ndarray):
        s = self.saved
        dlogits = (s["probs"] - s["soft"]) * s["keep"][:, None] / s["count"]
        return (dlogits * grad,)


class StraightThrough(Function):
    """Forward value of `q`; backward copies the downstream gradient to `e`."""

    def forward(self, e: np.ndarray, q: np.ndarray) -> np.ndarray:
        if e.shape != q.shape:
            raise ShapeError("straight_through", e.shape, q.shape)
        return q.copy()

    def backward(self, grad: np.ndarray):
        return grad, None


# -- functional wrappers ------------------------------------------------------


def add(a: Any, b: Any) -> Tensor:
    return Add.apply(as_tensor(a), as_tensor(b))


def sub(a: Any, b: Any) -> Tensor:
    return Sub.apply(as_tensor(a), as_tensor(b))


def mul(a: Any, b: Any) -> Tensor:
    return Mul.apply(as_tensor(a), as_tensor(b))


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return MatMul.apply(a, b)


def transpose(x: Tensor) -> Tensor:
    return Transpose.apply(x)


def sum(x: Tensor, axis: Optional[int] = None) -> Tensor:  # noqa: A001
    return Sum.apply(x, axis=axis)


def mean(x: Tensor) -> Tensor:
    return mul(Sum.apply(x), 1.0 / x.size)


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(x, shape=tuple(shape))


def take(table: Tensor, ids: Sequence[int]) -> Tensor:
    return Take.apply(table, ids=np.asarray(ids, dtype=np.int64))


def row(x: Tensor, i: int) -> Tensor:
    return Index.apply(x, index=(int(i),))


def columns(x: Tensor, start: int, stop: int) -> Tensor:
    return Index.apply(x, index=(slice(None), slice(start, stop)))


def rows(x: Tensor, start: int, stop: int) -> Tensor:
    return Index.apply(x, index=(slice(start, stop),))


def concat(tensors: List[Tensor], axis: int = 0) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def stack(tensors: List[Tensor]) -> Tensor:
    return Stack.apply(*tensors)


def softmax(x: Tensor, axis: int = -1, mask: Optional[np.ndarray] = None) -> Tensor:
    return Softmax.apply(x, axis=axis, mask=mask)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    return LogSoftmax.apply(x, axis=axis)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    return LayerNorm.apply(x, gain, bias, eps=eps)


def gelu(x: Tensor) -> Tensor:
    return Gelu.apply(x)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    out = matmul(x, weight)
    return out if bias is None else add(out, bias)


def dropout(x: Tensor, p: float, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity when `p == 0` or no generator is supplied."""
    if p <= 0.0 or rng is None:
        return x
    keep = (rng.random(x.shape) >= p).astype(DTYPE) / (1.0 - p)
    return mul(x, Tensor(keep))


def cross_entropy_smoothed(
    logits: Tensor,
    targets: Sequence[int],
    smoothing: float = 0.0,
    ignore_id: Optional[int] = None,
) -> Tensor:
    return CrossEntropySmoothed.apply(
        logits, targets=np.asarray(targets, dtype=np.int64), smoothing=smoothing, ignore_id=ignore_id
    )


def detach(x: Tensor) -> Tensor:
    return x.detach()


def straight_through(e: Tensor, q: Tensor) -> Tensor:
    return StraightThrough.apply(e, q)


def squared_distance(a: Tensor, b: Tensor) -> Tensor:
    diff = sub(a, b)
    return sum(mul(diff, diff))
