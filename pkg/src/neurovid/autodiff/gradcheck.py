"""Central finite-difference check of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from .tensor import Tensor, no_grad, zero_grad

STEP = 1e-5
TOLERANCE = 1e-4


@dataclass
class GradCheckReport:
    max_rel_error: float
    per_input: dict = field(default_factory=dict)
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        worst = ", ".join(f"{k}={v:.2e}" for k, v in self.per_input.items())
        return f"{status} max_rel_error={self.max_rel_error:.3e} ({worst})"


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """``||a - n|| / max(||a||, ||n||)``; 0 when both gradients vanish."""
    denom = max(np.linalg.norm(analytic), np.linalg.norm(numeric))
    if denom == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denom)


def grad_check(
    fn: Callable[[], Tensor],
    inputs: Mapping[str, Tensor] | Sequence[Tensor],
    tolerance: float = TOLERANCE,
    step: float = STEP,
    seed: int = 0,
) -> GradCheckReport:
    """Compare backprop gradients of ``fn`` against central differences.

    ``fn`` is re-evaluated with each input perturbed in place. Non-scalar
    outputs are reduced to a scalar through a fixed random projection so
    every output element contributes. All inputs must be float64.
    """
    if not isinstance(inputs, Mapping):
        inputs = {f"input{i}": t for i, t in enumerate(inputs)}
    for name, t in inputs.items():
        if t.dtype != np.float64:
            raise TypeError(f"grad_check needs float64 inputs (check64 mode); {name} is {t.dtype}")

    rng = np.random.default_rng(seed)
    probe = {}

    def scalar() -> Tensor:
        out = fn()
        if out.size == 1:
            return out.reshape(())
        if "w" not in probe:
            probe["w"] = Tensor(rng.uniform(0.5, 1.5, size=out.shape) * rng.choice([-1.0, 1.0], size=out.shape),
                                dtype=np.float64)
        return (out * probe["w"]).sum()

    tensors = list(inputs.values())
    for t in tensors:
        t.data = np.ascontiguousarray(t.data)
    zero_grad(tensors)
    for t in tensors:
        t.requires_grad = True
    loss = scalar()
    loss.backward()
    analytic = {name: (t.grad if t.grad is not None else np.zeros_like(t.data)) for name, t in inputs.items()}

    per_input = {}
    with no_grad():
        for name, t in inputs.items():
            flat = t.data.reshape(-1)
            numeric = np.empty_like(flat)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + step
                up = scalar().item()
                flat[i] = orig - step
                down = scalar().item()
                flat[i] = orig
                numeric[i] = (up - down) / (2 * step)
            per_input[name] = relative_error(analytic[name].reshape(-1), numeric)
    zero_grad(tensors)
    worst = max(per_input.values()) if per_input else 0.0
    return GradCheckReport(worst, per_input, tolerance)
