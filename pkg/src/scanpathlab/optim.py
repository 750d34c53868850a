"""Adam optimizer with bias correction."""

from __future__ import annotations

import numpy as np

from .errors import ContractViolation
from .tensor import Parameter


class AdamState:
    """First/second moments plus step counter for a fixed parameter set."""

    def __init__(
        self,
        params: list[Parameter],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ContractViolation("parameter names must be unique")
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = {p.name: np.zeros_like(p.value) for p in params}
        self.v = {p.name: np.zeros_like(p.value) for p in params}


def adam_step(params: list[Parameter], state: AdamState) -> None:
    """One in-place Adam update; increments the step counter."""
    for p in params:
        if p.name not in state.m:
            raise ContractViolation(f"parameter {p.name!r} missing from optimizer state")
        if p.grad.shape != p.value.shape:
            raise ContractViolation(f"parameter {p.name!r}: grad dims do not match value dims")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.t
    c2 = 1.0 - b2**state.t
    for p in params:
        m = state.m[p.name]
        v = state.v[p.name]
        m *= b1
        m += (1.0 - b1) * p.grad
        v *= b2
        v += (1.0 - b2) * (p.grad * p.grad)
        p.value -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
