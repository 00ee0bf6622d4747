"""SGD with classical momentum: v' = momentum*v - lr*g, p' = p + v'."""

from __future__ import annotations

import numpy as np

from .layers import ShapeError
from .network import Params


def zero_velocity(params: Params) -> Params:
    return {name: np.zeros_like(p) for name, p in params.items()}


def sgd_momentum_step(params: Params, grads: Params, velocity: Params,
                      lr: float, momentum: float) -> tuple[Params, Params]:
    """One optimizer step over every parameter tensor; returns (params', velocity')."""
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if not 0 <= momentum < 1:
        raise ValueError(f"momentum must be in [0,1), got {momentum}")
    if set(params) != set(grads) or set(params) != set(velocity):
        raise ShapeError("params, grads and velocity must share the same keys")
    new_params: Params = {}
    new_velocity: Params = {}
    for name, p in params.items():
        g, v = grads[name], velocity[name]
        if g.shape != p.shape or v.shape != p.shape:
            raise ShapeError(
                f"{name}: shape mismatch, param {p.shape}, grad {g.shape}, velocity {v.shape}")
        v_new = np.float32(momentum) * v - np.float32(lr) * g.astype(p.dtype, copy=False)
        new_velocity[name] = v_new
        new_params[name] = p + v_new
    return new_params, new_velocity
