"""
AdaDelta Optimizer for the RecNet Numeric Core

Functional AdaDelta over named parameter arrays: the update returns new
parameter and state mappings and never mutates its inputs, so a state
captured in a checkpoint stays valid after further training.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Tuple

import numpy as np

from src.numeric.tensor import DimensionError

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.95
DEFAULT_EPS = 1e-6
DEFAULT_CLIP_NORM = 5.0


@dataclass
class AdaDeltaState:
    """
    Running averages of squared gradients and squared updates.

    Attributes:
        square_grad: E[g^2] per parameter name
        square_update: E[dx^2] per parameter name
        rho: Decay of both running averages, in (0, 1)
        eps: Conditioning constant under both square roots
        steps: Number of updates applied
    """

    square_grad: Dict[str, np.ndarray] = field(default_factory=dict)
    square_update: Dict[str, np.ndarray] = field(default_factory=dict)
    rho: float = DEFAULT_RHO
    eps: float = DEFAULT_EPS
    steps: int = 0

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.eps <= 0.0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if set(self.square_grad) != set(self.square_update):
            raise ValueError("square_grad and square_update track different parameters")

    @classmethod
    def zeros_like(
        cls,
        params: Mapping[str, np.ndarray],
        rho: float = DEFAULT_RHO,
        eps: float = DEFAULT_EPS
    ) -> "AdaDeltaState":
        return cls(
            square_grad={name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()},
            square_update={name: np.zeros_like(value, dtype=np.float64) for name, value in params.items()},
            rho=rho,
            eps=eps
        )

    def merged(self, other: "AdaDeltaState") -> "AdaDeltaState":
        """Combine with the state of a disjoint parameter group; self's rho/eps/steps win."""
        overlap = set(self.square_grad) & set(other.square_grad)
        if overlap:
            raise ValueError(f"Cannot merge optimizer states sharing parameters: {sorted(overlap)}")
        return AdaDeltaState(
            square_grad={**self.square_grad, **other.square_grad},
            square_update={**self.square_update, **other.square_update},
            rho=self.rho,
            eps=self.eps,
            steps=self.steps
        )

    def subset(self, names: Iterable[str]) -> "AdaDeltaState":
        names = list(names)
        return AdaDeltaState(
            square_grad={name: self.square_grad[name] for name in names},
            square_update={name: self.square_update[name] for name in names},
            rho=self.rho,
            eps=self.eps,
            steps=self.steps
        )


def adadelta_update(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    state: AdaDeltaState
) -> Tuple[Dict[str, np.ndarray], AdaDeltaState]:
    """
    Apply one AdaDelta step.

        E[g^2]  <- rho E[g^2] + (1 - rho) g^2
        dx      <- sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
        x       <- x - dx
        E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2

    Args:
        params: Parameter arrays by name
        grads: Gradients with the same names and shapes
        state: Current optimizer state covering every parameter

    Returns:
        Tuple of (updated parameters, updated state)

    Raises:
        DimensionError: If names or shapes disagree
    """
    if set(params) != set(grads):
        missing = sorted(set(params) ^ set(grads))
        raise DimensionError(f"Parameters and gradients differ in names: {missing}")

    missing_state = sorted(set(params) - set(state.square_grad))
    if missing_state:
        raise DimensionError(f"Optimizer state does not track parameters: {missing_state}")

    rho, eps = state.rho, state.eps
    new_params: Dict[str, np.ndarray] = {}
    square_grad: Dict[str, np.ndarray] = dict(state.square_grad)
    square_update: Dict[str, np.ndarray] = dict(state.square_update)

    for name, value in params.items():
        grad = grads[name]
        if grad.shape != value.shape or state.square_grad[name].shape != value.shape:
            raise DimensionError(
                f"{name}: parameter shape {value.shape}, gradient shape {grad.shape}, "
                f"state shape {state.square_grad[name].shape}"
            )

        acc_grad = rho * state.square_grad[name] + (1.0 - rho) * grad * grad
        delta = np.sqrt(state.square_update[name] + eps) / np.sqrt(acc_grad + eps) * grad
        new_params[name] = value - delta
        square_grad[name] = acc_grad
        square_update[name] = rho * state.square_update[name] + (1.0 - rho) * delta * delta

    new_state = AdaDeltaState(
        square_grad=square_grad,
        square_update=square_update,
        rho=rho,
        eps=eps,
        steps=state.steps + 1
    )
    return new_params, new_state


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    """Joint Euclidean norm, summed exactly (order-independent)."""
    return math.sqrt(math.fsum(float(np.sum(g * g)) for g in grads.values()))


def clip_by_global_norm(
    grads: Mapping[str, np.ndarray],
    max_norm: float = DEFAULT_CLIP_NORM
) -> Tuple[Dict[str, np.ndarray], float]:
    """
    Rescale gradients so their joint Euclidean norm is at most max_norm.

    Returns:
        Tuple of (possibly rescaled gradients, norm before clipping)
    """
    norm = global_norm(grads)
    if max_norm <= 0.0 or norm <= max_norm:
        return dict(grads), norm

    scale = max_norm / norm
    logger.debug(f"Clipping gradients: norm {norm:.4f} > {max_norm}")
    return {name: g * scale for name, g in grads.items()}, norm
