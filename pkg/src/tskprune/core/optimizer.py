"""AdaBound: Adam with per-coordinate learning rates clipped to a shrinking band."""

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InputShapeError, ParameterDomainError

BETA1 = 0.9
BETA2 = 0.999
EPSILON = 1e-8
FINAL_LR = 0.01


@dataclass(frozen=True)
class AdaBoundState:
    """Moment estimates and step counter of one optimization run.

    ``rates`` holds the clipped per-coordinate learning rates of the last
    step, or None before the first step.
    """

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = BETA1
    beta2: float = BETA2
    rates: Optional[np.ndarray] = None

    @classmethod
    def zeros(cls, size: int) -> "AdaBoundState":
        """Fresh state for a parameter vector of length ``size``."""
        return cls(m=np.zeros(size), v=np.zeros(size))


def adabound_bounds(
    step: int, beta2: float = BETA2, final_lr: float = FINAL_LR
) -> tuple[float, float]:
    """Lower and upper learning-rate bounds at ``step`` (1-based).

    Both converge to ``final_lr``; the upper bound is infinite before the
    first step.
    """
    if step < 0:
        raise ParameterDomainError(f"Step must be >= 0, got {step}")
    lower = final_lr - final_lr / ((1.0 - beta2) * step + 1.0)
    upper = np.inf if step == 0 else final_lr + final_lr / ((1.0 - beta2) * step)
    return lower, upper


def adabound_step(
    theta: np.ndarray,
    grad: np.ndarray,
    state: AdaBoundState,
    lr: float,
    final_lr: float = FINAL_LR,
) -> tuple[np.ndarray, AdaBoundState]:
    """One AdaBound update; returns the new parameters and state.

    The step counter is advanced before it is used for bias correction and
    for the bound schedule.
    """
    theta = np.asarray(theta, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if theta.shape != grad.shape or theta.shape != state.m.shape:
        raise InputShapeError(
            f"Parameter {theta.shape}, gradient {grad.shape} and state {state.m.shape} "
            "shapes differ"
        )
    if lr <= 0:
        raise ParameterDomainError(f"Learning rate must be > 0, got {lr}")

    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad**2
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)

    lower, upper = adabound_bounds(step, state.beta2, final_lr)
    rates = np.clip(lr / (np.sqrt(v_hat) + EPSILON), lower, upper)
    updated = theta - rates * m_hat
    return updated, replace(state, m=m, v=v, step=step, rates=rates)
