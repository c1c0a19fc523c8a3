"""
Tensor and Gradient Tape for the RecNet Numeric Core

Dense 64-bit arrays with reverse-mode differentiation. A Tensor created
from operands that live on a GradientTape is recorded on that tape;
tensors without a tape are constants and cost nothing beyond the numpy
computation, so the same model code serves training and inference.
"""

import logging
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, float, int, Sequence[float]]
BackwardFn = Callable[[np.ndarray], Tuple[Optional[np.ndarray], ...]]


class DimensionError(ValueError):
    """Raised when operand shapes do not agree."""
    pass


class GradientError(RuntimeError):
    """Raised when a backward pass cannot be performed."""
    pass


class Tensor:
    """
    A node of the computation graph.

    Leaves watched by a tape are parameters; interior nodes keep their
    parents and a closure mapping the upstream adjoint to one adjoint per
    parent.
    """

    __slots__ = ("data", "tape", "parents", "backward_fn", "index", "name")

    def __init__(
        self,
        data: ArrayLike,
        tape: Optional["GradientTape"] = None,
        parents: Tuple["Tensor", ...] = (),
        backward_fn: Optional[BackwardFn] = None,
        name: Optional[str] = None
    ):
        self.data = np.asarray(data, dtype=np.float64)
        self.tape = tape
        self.parents = parents
        self.backward_fn = backward_fn
        self.name = name
        self.index = -1

        if tape is not None:
            tape.record(self)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def __repr__(self) -> str:
        where = "tape" if self.tape is not None else "const"
        label = f" {self.name}" if self.name else ""
        return f"Tensor{label}(shape={self.shape}, {where})"

    # Arithmetic is routed through src.numeric.ops to keep one backward rule per op.

    def __add__(self, other):
        from src.numeric import ops
        return ops.add(self, other)

    def __radd__(self, other):
        from src.numeric import ops
        return ops.add(other, self)

    def __sub__(self, other):
        from src.numeric import ops
        return ops.sub(self, other)

    def __rsub__(self, other):
        from src.numeric import ops
        return ops.sub(other, self)

    def __mul__(self, other):
        from src.numeric import ops
        return ops.mul(self, other)

    def __rmul__(self, other):
        from src.numeric import ops
        return ops.mul(other, self)

    def __truediv__(self, other):
        from src.numeric import ops
        return ops.div(self, other)

    def __neg__(self):
        from src.numeric import ops
        return ops.neg(self)

    def __getitem__(self, index):
        from src.numeric import ops
        return ops.getitem(self, index)


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    """Wrap a plain value as a constant tensor; tensors pass through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def common_tape(operands: Iterable[Tensor]) -> Optional["GradientTape"]:
    """
    Find the tape shared by the operands.

    Raises:
        GradientError: If operands were recorded on different tapes
    """
    tape = None
    for operand in operands:
        if operand.tape is None:
            continue
        if tape is None:
            tape = operand.tape
        elif operand.tape is not tape:
            raise GradientError("Operands belong to different gradient tapes")
    return tape


def make_result(
    data: np.ndarray,
    parents: Tuple[Tensor, ...],
    backward_fn: BackwardFn
) -> Tensor:
    """Create an op result, recording it only when a parent is on a tape."""
    tape = common_tape(parents)
    if tape is None:
        return Tensor(data)
    return Tensor(data, tape=tape, parents=parents, backward_fn=backward_fn)


class GradientTape:
    """
    Records operations in creation order, which is a topological order
    of the graph. Not thread-safe; one tape per forward/backward pass.
    """

    def __init__(self):
        self._nodes: List[Tensor] = []
        self._variables: Dict[str, Tensor] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    @property
    def nodes(self) -> List[Tensor]:
        return list(self._nodes)

    @property
    def variables(self) -> Dict[str, Tensor]:
        return dict(self._variables)

    def record(self, node: Tensor) -> None:
        node.index = len(self._nodes)
        self._nodes.append(node)

    def variable(self, data: ArrayLike, name: str) -> Tensor:
        """
        Watch a parameter array.

        Args:
            data: Parameter value (copied)
            name: Unique parameter name used as the gradient key

        Returns:
            Leaf tensor recorded on this tape
        """
        if name in self._variables:
            raise GradientError(f"Parameter '{name}' is already watched by this tape")

        leaf = Tensor(np.array(data, dtype=np.float64), tape=self, name=name)
        self._variables[name] = leaf
        return leaf

    def watch(self, params: Mapping[str, ArrayLike]) -> Dict[str, Tensor]:
        """Watch every array of a named parameter set."""
        return {name: self.variable(value, name) for name, value in params.items()}


def backward(tape: GradientTape, loss: Tensor) -> Dict[str, np.ndarray]:
    """
    Run reverse-mode differentiation from a scalar loss.

    Nodes are visited in exact reverse creation order. Parameters the loss
    does not depend on receive zero gradients.

    Args:
        tape: Tape the loss was recorded on
        loss: Scalar tensor

    Returns:
        Dictionary mapping each watched parameter name to its gradient

    Raises:
        GradientError: If the loss is not a scalar, not on this tape, or not finite
    """
    if loss.data.size != 1:
        raise GradientError(f"Loss must be a scalar, got shape {loss.shape}")

    if loss.tape is not tape:
        if loss.tape is None:
            # Constant loss: nothing depends on the parameters
            return {name: np.zeros_like(leaf.data) for name, leaf in tape.variables.items()}
        raise GradientError("Loss was recorded on a different tape")

    if not np.all(np.isfinite(loss.data)):
        raise GradientError(f"Loss is not finite: {loss.data}")

    nodes = tape.nodes
    adjoints: List[Optional[np.ndarray]] = [None] * len(nodes)
    adjoints[loss.index] = np.ones_like(loss.data)

    for index in range(loss.index, -1, -1):
        node = nodes[index]
        adjoint = adjoints[index]

        if adjoint is None or node.backward_fn is None:
            continue

        parent_grads = node.backward_fn(adjoint)

        for parent, grad in zip(node.parents, parent_grads):
            if grad is None or parent.tape is not tape:
                continue
            if grad.shape != parent.data.shape:
                raise GradientError(
                    f"Backward rule produced shape {grad.shape} for operand of shape {parent.data.shape}"
                )
            if adjoints[parent.index] is None:
                adjoints[parent.index] = grad
            else:
                adjoints[parent.index] = adjoints[parent.index] + grad

    gradients = {}
    for name, leaf in tape.variables.items():
        adjoint = adjoints[leaf.index]
        gradients[name] = np.zeros_like(leaf.data) if adjoint is None else np.array(adjoint)

    logger.debug(f"Backward pass over {loss.index + 1} nodes, {len(gradients)} parameters")
    return gradients
