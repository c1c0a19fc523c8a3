"""
LSTM Cell for the RecNet Numeric Core

A single fused-weight LSTM step shared by the decoder and both
reconstructors. The weight matrix acts on the concatenation of the step
inputs and the previous hidden state; its row blocks are the input,
forget, output and candidate gates in that order.
"""

import logging
from dataclasses import dataclass
from typing import Sequence, Tuple, Union

import numpy as np

from src.numeric import ops
from src.numeric.tensor import DimensionError, Tensor, as_tensor

logger = logging.getLogger(__name__)

GATE_ORDER = ("input", "forget", "output", "candidate")


@dataclass(frozen=True)
class LSTMState:
    """Cell memory and hidden output; both shaped (..., hidden)."""

    memory: Tensor
    hidden: Tensor

    def __post_init__(self):
        if self.memory.shape != self.hidden.shape:
            raise DimensionError(
                f"LSTMState memory shape {self.memory.shape} differs from hidden shape {self.hidden.shape}"
            )

    @classmethod
    def zeros(cls, hidden_size: int, batch_size: int = None) -> "LSTMState":
        shape: Tuple[int, ...] = (hidden_size,) if batch_size is None else (batch_size, hidden_size)
        return cls(memory=Tensor(np.zeros(shape)), hidden=Tensor(np.zeros(shape)))

    @property
    def hidden_size(self) -> int:
        return self.hidden.shape[-1]


def lstm_step(
    inputs: Union[Tensor, Sequence[Tensor]],
    prev: LSTMState,
    weights: Tensor,
    bias: Tensor
) -> LSTMState:
    """
    Advance an LSTM cell by one step.

    Args:
        inputs: Step input, or several inputs concatenated in order
        prev: Previous state
        weights: Fused matrix of shape (4*hidden, input_len + hidden)
        bias: Fused bias of shape (4*hidden,)

    Returns:
        New LSTMState

    Raises:
        DimensionError: If an operand's shape disagrees with the others
    """
    if isinstance(inputs, (Tensor, np.ndarray)):
        inputs = [inputs]
    parts = [as_tensor(x) for x in inputs]
    weights = as_tensor(weights)
    bias = as_tensor(bias)

    hidden_size = prev.hidden_size
    input_len = int(np.sum([p.shape[-1] for p in parts]))

    if weights.ndim != 2 or weights.shape[0] != 4 * hidden_size:
        raise DimensionError(
            f"weights: expected {4 * hidden_size} rows for hidden size {hidden_size}, got shape {weights.shape}"
        )
    if weights.shape[1] != input_len + hidden_size:
        raise DimensionError(
            f"weights: expected {input_len + hidden_size} columns "
            f"(inputs {input_len} + hidden {hidden_size}), got {weights.shape[1]}"
        )
    if bias.shape != (4 * hidden_size,):
        raise DimensionError(f"bias: expected shape ({4 * hidden_size},), got {bias.shape}")
    for position, part in enumerate(parts):
        if part.shape[:-1] != prev.hidden.shape[:-1]:
            raise DimensionError(
                f"input {position}: leading shape {part.shape[:-1]} does not match state {prev.hidden.shape[:-1]}"
            )

    joined = ops.concat(parts + [prev.hidden], axis=-1)
    gates = ops.linear(joined, weights, bias)

    h = hidden_size
    input_gate = ops.sigmoid(gates[..., 0:h])
    forget_gate = ops.sigmoid(gates[..., h:2 * h])
    output_gate = ops.sigmoid(gates[..., 2 * h:3 * h])
    candidate = ops.tanh(gates[..., 3 * h:4 * h])

    memory = forget_gate * prev.memory + input_gate * candidate
    hidden = output_gate * ops.tanh(memory)

    return LSTMState(memory=memory, hidden=hidden)
