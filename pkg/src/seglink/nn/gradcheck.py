"""Central finite-difference verification of reverse-mode gradients."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from ..errors import DeterminismError
from .autodiff import Tensor, grad


@dataclass
class GradCheckReport:
    max_rel_error: float
    tolerance: float
    worst_param: str
    per_param: Dict[str, float] = field(default_factory=dict)
    entries_checked: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tolerance

    def summary(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return (f"{verdict} max relative error {self.max_rel_error:.3e} "
                f"(tolerance {self.tolerance:.1e}, worst {self.worst_param}, "
                f"{self.entries_checked} entries)")


def relative_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def finite_diff_check(forward: Callable[[], Tensor], params, tolerance: float = 1e-4,
                      h: float = 1e-5, max_entries_per_param: Optional[int] = None,
                      analytic: Optional[Dict[str, np.ndarray]] = None,
                      rng: Optional[np.random.Generator] = None,
                      directions: int = 0) -> GradCheckReport:
    """Compare reverse-mode gradients of ``forward()`` with central differences.

    ``forward`` must rebuild the loss from the current parameter values on
    every call. ``analytic`` overrides the gradients under test (useful as a
    negative control). ``max_entries_per_param`` subsamples large
    parameters with ``rng``; ``directions`` additionally compares, per
    parameter, the directional derivative along that many random unit
    vectors spanning the whole tensor, so subsampled tensors are still
    covered in aggregate.
    """
    base = forward()
    again = forward()
    if base.data.tobytes() != again.data.tobytes():
        raise DeterminismError("forward closure returned different losses on identical parameters")
    if analytic is None:
        analytic = grad(base, params)
    rng = rng or np.random.default_rng(0)

    worst, worst_name, checked = 0.0, "", 0
    per_param = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries_per_param is not None and flat.size > max_entries_per_param:
            idx = np.sort(rng.choice(flat.size, max_entries_per_param, replace=False))
        a_flat = np.asarray(analytic[name]).reshape(-1)
        param_worst = 0.0
        for e in idx:
            orig = flat[e]
            flat[e] = orig + h
            f_plus = forward().item()
            flat[e] = orig - h
            f_minus = forward().item()
            flat[e] = orig
            numeric = (f_plus - f_minus) / (2 * h)
            err = relative_error(a_flat[e], numeric)
            param_worst = max(param_worst, err)
            checked += 1
        for _ in range(directions):
            v = rng.standard_normal(flat.size)
            v /= np.linalg.norm(v)
            orig = flat.copy()
            flat[:] = orig + h * v
            f_plus = forward().item()
            flat[:] = orig - h * v
            f_minus = forward().item()
            flat[:] = orig
            err = relative_error(float(a_flat @ v), (f_plus - f_minus) / (2 * h))
            param_worst = max(param_worst, err)
            checked += 1
        per_param[name] = param_worst
        if param_worst >= worst:
            worst, worst_name = param_worst, name
    return GradCheckReport(worst, tolerance, worst_name, per_param, checked)
