"""
Finite-Difference Gradient Check for the RecNet Numeric Core

Compares tape gradients against central differences of the same loss,
entry by entry.
"""

import logging
from typing import Callable, Dict, Mapping

import numpy as np

from src.numeric.tensor import GradientTape, Tensor, backward

logger = logging.getLogger(__name__)

LossFn = Callable[[Mapping[str, Tensor]], Tensor]

DEFAULT_STEP = 1e-5
RELATIVE_FLOOR = 1e-12


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Largest entrywise |a - c| / max(|a|, |c|, 1e-12)."""
    analytic = np.ravel(np.asarray(analytic, dtype=np.float64))
    numeric = np.ravel(np.asarray(numeric, dtype=np.float64))
    if analytic.size == 0:
        return 0.0
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), RELATIVE_FLOOR)
    return float(np.max(np.abs(analytic - numeric) / scale))


def analytic_gradients(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> Dict[str, np.ndarray]:
    tape = GradientTape()
    variables = tape.watch(params)
    return backward(tape, loss_fn(variables))


def _evaluate(loss_fn: LossFn, params: Mapping[str, np.ndarray]) -> float:
    return loss_fn({name: Tensor(value) for name, value in params.items()}).item()


def central_differences(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    step: float = DEFAULT_STEP
) -> Dict[str, np.ndarray]:
    """(L(x + step) - L(x - step)) / (2 step) for every entry of every array."""
    if step <= 0.0:
        raise ValueError(f"step must be positive, got {step}")

    base = {name: np.array(value, dtype=np.float64) for name, value in params.items()}
    numeric: Dict[str, np.ndarray] = {}

    for name, value in base.items():
        flat = value.reshape(-1)
        estimates = np.empty(flat.size)
        for position in range(flat.size):
            original = flat[position]
            flat[position] = original + step
            upper = _evaluate(loss_fn, base)
            flat[position] = original - step
            lower = _evaluate(loss_fn, base)
            flat[position] = original
            estimates[position] = (upper - lower) / (2.0 * step)
        numeric[name] = estimates.reshape(value.shape)

    return numeric


def gradient_errors(
    loss_fn: LossFn,
    params: Mapping[str, np.ndarray],
    step: float = DEFAULT_STEP
) -> Dict[str, float]:
    """
    Largest entrywise relative error between analytic and central-difference
    gradients, one value per parameter array.

    Args:
        loss_fn: Maps named parameter tensors to a scalar loss; must be deterministic
        params: Point at which gradients are compared
        step: Central-difference half width, > 0

    Returns:
        Dictionary mapping parameter name to relative error
    """
    numeric = central_differences(loss_fn, params, step)
    analytic = analytic_gradients(loss_fn, {name: np.array(v, dtype=np.float64) for name, v in params.items()})

    errors: Dict[str, float] = {}
    for name, estimate in numeric.items():
        errors[name] = relative_error(analytic[name], estimate)
        logger.debug(f"Gradient check {name}: {estimate.size} entries, relative error {errors[name]:.3e}")
    return errors


def finite_diff_check(loss_fn: LossFn, params: Mapping[str, np.ndarray], step: float = DEFAULT_STEP) -> float:
    """
    Maximum entrywise relative error over every entry of every parameter array.

    See gradient_errors for the arguments.
    """
    errors = gradient_errors(loss_fn, params, step=step)
    worst = max(errors.values()) if errors else 0.0
    logger.info(f"Gradient check over {len(errors)} arrays: max relative error {worst:.3e}")
    return worst
