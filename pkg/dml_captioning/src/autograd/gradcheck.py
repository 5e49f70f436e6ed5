"""Central finite-difference gradient checking."""

from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from .tensor import Tensor, no_grad

FD_STEP = 1e-5
ANALYTIC_FLOOR = 1e-8
ZERO_TOLERANCE = 1e-6


@dataclass
class GradcheckReport:
    max_rel_error: float
    checked: int
    skipped: int

    def passed(self, tolerance: float) -> bool:
        return self.max_rel_error < tolerance


def numerical_gradient(
    loss_fn: Callable[[], Tensor], tensor: Tensor, step: float = FD_STEP
) -> np.ndarray:
    """Central differences of `loss_fn()` with respect to `tensor.data`, in place."""
    grad = np.zeros_like(tensor.data)
    data = tensor.data
    with no_grad():
        for i in np.ndindex(data.shape):
            original = data[i]
            data[i] = original + step
            plus = loss_fn().item()
            data[i] = original - step
            minus = loss_fn().item()
            data[i] = original
            grad[i] = (plus - minus) / (2.0 * step)
    return grad


def _relative(a: np.ndarray, n: np.ndarray) -> np.ndarray:
    return np.abs(a - n) / np.maximum(np.abs(a), np.abs(n))


def check_gradients(
    loss_fn: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    step: float = FD_STEP,
    floor: float = ANALYTIC_FLOOR,
    per_tensor: bool = False,
) -> GradcheckReport:
    """Compare analytic gradients of `loss_fn` with central differences.

    Elementwise (the default), the error of an element with |analytic| > `floor`
    is |a - n| / max(|a|, |n|). Elements at or below `floor` are not counted,
    but their numeric value must stay within `ZERO_TOLERANCE` of zero.

    With `per_tensor`, each input contributes ||a - n|| / max(||a||, ||n||)
    instead. Whole-model checks use this, where many weakly coupled parameters
    carry gradients close to finite-difference noise.
    """
    for tensor in inputs:
        tensor.zero_grad()
    loss_fn().backward()
    analytic: List[np.ndarray] = [
        t.grad.copy() if t.grad is not None else np.zeros_like(t.data) for t in inputs
    ]

    worst, checked, skipped = 0.0, 0, 0
    for tensor, a in zip(inputs, analytic):
        n = numerical_gradient(loss_fn, tensor, step)
        if per_tensor:
            scale = max(float(np.linalg.norm(a)), float(np.linalg.norm(n)))
            if scale > floor:
                worst = max(worst, float(np.linalg.norm(a - n)) / scale)
                checked += a.size
            else:
                skipped += a.size
            continue
        big = np.abs(a) > floor
        if np.any(big):
            worst = max(worst, float(_relative(a[big], n[big]).max()))
            checked += int(big.sum())
        small = ~big
        skipped += int(small.sum())
        if np.any(small) and float(np.abs(n[small]).max()) > ZERO_TOLERANCE:
            worst = max(worst, 1.0)
    return GradcheckReport(max_rel_error=worst, checked=checked, skipped=skipped)
