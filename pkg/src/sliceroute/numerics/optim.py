"""Adam optimizer operating in place on leaf tensors."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import StateError
from .tensor import Tensor


class Adam:
    """Bias-corrected Adam state bound to a fixed parameter list.

    Moment buffers mirror the parameter shapes; the step counter increases by
    one per `step`.  Gradients are left untouched by `step` — the caller
    resets them via `zero_grad`.
    """

    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        epsilon: float = 1e-8,
    ):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.t = 0
        self.m = [np.zeros_like(p.values) for p in self.params]
        self.v = [np.zeros_like(p.values) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        correction1 = 1.0 - b1**self.t
        correction2 = 1.0 - b2**self.t
        for i, p in enumerate(self.params):
            if self.m[i].shape != p.values.shape:
                raise StateError(
                    f"moment buffer shape {self.m[i].shape} does not match parameter shape {p.values.shape}"
                )
            g = p.grad
            self.m[i] = b1 * self.m[i] + (1.0 - b1) * g
            self.v[i] = b2 * self.v[i] + (1.0 - b2) * g * g
            m_hat = self.m[i] / correction1
            v_hat = self.v[i] / correction2
            p.values -= self.lr * m_hat / (np.sqrt(v_hat) + self.epsilon)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
