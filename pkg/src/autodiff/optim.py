"""
SGD and Adam parameter updates.

optimizer_step() is the functional form; Optimizer binds it to a parameter
list so each model owns independent state.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, NonFiniteError, ShapeError

OPTIMIZER_KINDS = ("sgd", "adam")


@dataclass
class OptimizerState:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise ContractError(f"unknown optimizer '{self.kind}', expected one of {OPTIMIZER_KINDS}")
        if self.learning_rate < 0:
            raise ContractError(f"learning rate must be non-negative, got {self.learning_rate}")


def optimizer_step(params: list, grads: list, state: OptimizerState) -> OptimizerState:
    """Update `params` in place from `grads` and advance `state`."""
    if len(params) != len(grads):
        raise ShapeError(f"{len(params)} parameters but {len(grads)} gradients")
    grads = [np.asarray(g, dtype=np.float64) for g in grads]
    for index, (param, grad) in enumerate(zip(params, grads)):
        if grad.shape != param.shape:
            raise ShapeError(f"gradient {index} has shape {grad.shape}, parameter has {param.shape}")
        if not np.all(np.isfinite(grad)):
            bad = int(grad.size - np.count_nonzero(np.isfinite(grad)))
            raise NonFiniteError(
                f"gradient for parameter {index} (shape {param.shape}) has {bad} non-finite entries"
            )

    state.step += 1
    lr = state.learning_rate
    if state.kind == "sgd":
        for param, grad in zip(params, grads):
            param.data = param.data - lr * grad
        return state

    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    for index, (param, grad) in enumerate(zip(params, grads)):
        state.m[index] = state.beta1 * state.m[index] + (1.0 - state.beta1) * grad
        state.v[index] = state.beta2 * state.v[index] + (1.0 - state.beta2) * grad * grad
        m_hat = state.m[index] / correction1
        v_hat = state.v[index] / correction2
        param.data = param.data - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return state


class Optimizer:
    """Optimizer bound to one model's parameters."""

    def __init__(self, params: list, kind: str = "adam", learning_rate: float = 1e-3, **kwargs):
        self.params = list(params)
        self.state = OptimizerState(kind=kind, learning_rate=learning_rate, **kwargs)

    def step(self, grads) -> None:
        """`grads` is a list aligned with params or a map returned by backward()."""
        if isinstance(grads, dict):
            grads = [grads[p] if p in grads else np.zeros_like(p.data) for p in self.params]
        optimizer_step(self.params, grads, self.state)

    @property
    def learning_rate(self) -> float:
        return self.state.learning_rate
