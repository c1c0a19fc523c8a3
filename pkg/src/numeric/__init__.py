"""
Numeric Core for RecNet

This module provides the arithmetic every model component builds on:
- Tensor and GradientTape with reverse-mode differentiation
- Differentiable ops (elementwise, linear, masked softmax, lookups)
- Fused-weight LSTM cell
- AdaDelta optimizer and global-norm gradient clipping
- Central-difference gradient check

Usage:
    from src.numeric import GradientTape, backward, ops

    tape = GradientTape()
    x = tape.variable([1.0, 2.0, 3.0], "x")
    grads = backward(tape, ops.sum(ops.square(x)))
"""

from src.numeric import ops
from src.numeric.tensor import DimensionError, GradientError, GradientTape, Tensor, backward
from src.numeric.lstm import LSTMState, lstm_step
from src.numeric.optim import AdaDeltaState, adadelta_update, clip_by_global_norm
from src.numeric.gradcheck import central_differences, finite_diff_check, gradient_errors

__all__ = [
    "ops",
    "Tensor",
    "GradientTape",
    "backward",
    "DimensionError",
    "GradientError",
    "LSTMState",
    "lstm_step",
    "AdaDeltaState",
    "adadelta_update",
    "clip_by_global_norm",
    "central_differences",
    "finite_diff_check",
    "gradient_errors",
]
