"""Adam optimizer with bias correction.

State lives next to, not inside, the model: a step counter plus first
and second moment arrays shaped like the parameters.  adam_step mutates
the parameter arrays in place (the model keeps owning them) and returns
the state for chaining.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import NNError

LEARNING_RATE = 1e-3
BETA1 = 0.9
BETA2 = 0.999
EPS_HAT = 1e-7


@dataclass
class AdamState:
    t: int
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps_hat: float = EPS_HAT


def init_adam(params: list[np.ndarray], lr: float = LEARNING_RATE,
              beta1: float = BETA1, beta2: float = BETA2,
              eps_hat: float = EPS_HAT) -> AdamState:
    return AdamState(t=0,
                     m=[np.zeros_like(p) for p in params],
                     v=[np.zeros_like(p) for p in params],
                     lr=lr, beta1=beta1, beta2=beta2, eps_hat=eps_hat)


def adam_step(state: AdamState, params: list[np.ndarray],
              grads: list[np.ndarray]) -> AdamState:
    if not (len(state.m) == len(params) == len(grads)):
        raise NNError(f"adam arity mismatch: {len(state.m)} moments, "
                      f"{len(params)} params, {len(grads)} grads")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    # bias corrections as python floats; numpy keeps the array dtype
    c1 = 1.0 / (1.0 - b1 ** state.t)
    c2 = 1.0 / (1.0 - b2 ** state.t)
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise NNError(f"grad shape {g.shape} != param shape {p.shape}")
        g = g.astype(p.dtype, copy=False)
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * np.square(g)
        p -= state.lr * (m * c1) / (np.sqrt(v * c2) + state.eps_hat)
    return state
