"""Adam with bias correction, plus Gaussian parameter perturbation.

Functional style: adam_step returns a new (state, params) pair and never
mutates its inputs, so training loops stay replayable.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ShapeMismatch


@dataclass(frozen=True)
class AdamState:
    step: int
    first_moment: np.ndarray
    second_moment: np.ndarray
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(n_params: int, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    if not (0.0 <= beta1 < 1.0 and 0.0 <= beta2 < 1.0):
        raise ValueError("betas must lie in [0, 1)")
    return AdamState(
        step=0,
        first_moment=np.zeros(n_params),
        second_moment=np.zeros(n_params),
        lr=lr,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(state: AdamState, grad: np.ndarray, params: np.ndarray):
    """One bias-corrected Adam update; returns (new_state, new_params)."""
    grad = np.asarray(grad, dtype=float)
    params = np.asarray(params, dtype=float)
    if grad.shape != params.shape or grad.shape != state.first_moment.shape:
        raise ShapeMismatch(
            f"adam shapes disagree: grad {grad.shape}, params {params.shape}, "
            f"moments {state.first_moment.shape}"
        )
    t = state.step + 1
    m = state.beta1 * state.first_moment + (1.0 - state.beta1) * grad
    v = state.beta2 * state.second_moment + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return replace(state, step=t, first_moment=m, second_moment=v), new_params


def langevin_perturb(params: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """params + sigma * standard normal; sigma = 0 is the identity."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    params = np.asarray(params, dtype=float)
    if sigma == 0.0:
        return params.copy()
    return params + sigma * rng.standard_normal(params.shape)
