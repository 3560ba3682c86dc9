"""Named parameter storage, initialization and the Adam optimizer."""
from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from ..errors import ShapeError
from . import autodiff
from .autodiff import Tensor


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray


class ParamStore:
    """Ordered name -> :class:`Tensor` mapping plus Adam moments and step count."""

    def __init__(self):
        self._params: "OrderedDict[str, Tensor]" = OrderedDict()
        self.state: dict = {}
        self.step = 0

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(value, dtype=autodiff.DTYPE), name=name)
        self._params[name] = t
        self.state[name] = AdamState(np.zeros_like(t.data), np.zeros_like(t.data))
        return t

    def init_uniform(self, name: str, shape, fan_in: int, rng: np.random.Generator) -> Tensor:
        """Uniform in ``(-1/sqrt(fan_in), 1/sqrt(fan_in))``."""
        bound = 1.0 / np.sqrt(fan_in)
        return self.add(name, rng.uniform(-bound, bound, size=shape))

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self):
        return len(self._params)

    def keys(self):
        return self._params.keys()

    def items(self):
        return self._params.items()

    def values_dict(self) -> dict:
        return {k: t.data.copy() for k, t in self._params.items()}

    def num_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def set_value(self, name: str, value: np.ndarray) -> None:
        t = self._params[name]
        value = np.asarray(value, dtype=t.data.dtype)
        if value.shape != t.shape:
            raise ShapeError(f"{name}: expected shape {t.shape}, got {value.shape}")
        t.data = value.copy()


def adam_step(params: ParamStore, grads: dict, lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> ParamStore:
    """One bias-corrected Adam update, applied in place; returns ``params``."""
    params.step += 1
    t = params.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != p.shape:
            raise ShapeError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        st = params.state[name]
        st.m = beta1 * st.m + (1.0 - beta1) * g
        st.v = beta2 * st.v + (1.0 - beta2) * g * g
        p.data = p.data - lr * (st.m / c1) / (np.sqrt(st.v / c2) + eps)
    return params
