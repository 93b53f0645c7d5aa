"""
Dense tensor with reverse-mode gradient accumulation.

Every operation records its parents and a backward closure mapping the
output gradient to one gradient per parent. A fresh trace is built on each
forward call; nothing is compiled or cached between calls.
"""

import threading
from contextlib import contextmanager
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import ShapeError

# One precision for the whole repository.
DTYPE = np.float64

_grad_state = threading.local()


def is_grad_enabled() -> bool:
    return getattr(_grad_state, "enabled", True)


@contextmanager
def no_grad():
    """Skip trace construction in the current thread (inference only)"""
    previous = is_grad_enabled()
    _grad_state.enabled = False
    try:
        yield
    finally:
        _grad_state.enabled = previous

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence[float]]


class Tensor:
    """A numpy array plus the bookkeeping needed for backpropagation"""

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        if isinstance(data, Tensor):
            data = data.data
        self.data: np.ndarray = np.asarray(data, dtype=DTYPE)
        self.requires_grad: bool = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self._parents: Tuple["Tensor", ...] = ()
        self._backward_fn: Optional[BackwardFn] = None

    # --- convenience ---
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def is_leaf(self) -> bool:
        return self._backward_fn is None

    def item(self) -> float:
        if self.data.size != 1:
            raise ShapeError("item", self.shape, detail="only a single-element tensor converts to a float")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.data)

    def __repr__(self) -> str:
        req = ", requires_grad=True" if self.requires_grad else ""
        nm = f", name={self.name}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{req}{nm})"

    # --- autograd ---
    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into every leaf that requires a gradient"""
        backward(self)

    # --- operators ---
    def __add__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.add(self, other)

    def __radd__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.add(other, self)

    def __sub__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.sub(self, other)

    def __rsub__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.sub(other, self)

    def __mul__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.mul(self, other)

    def __rmul__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.mul(other, self)

    def __neg__(self) -> "Tensor":
        from . import ops
        return ops.neg(self)

    def __matmul__(self, other: ArrayLike) -> "Tensor":
        from . import ops
        return ops.matmul(self, other)

    def __getitem__(self, index) -> "Tensor":
        from . import ops
        return ops.index(self, index)

    def reshape(self, *shape) -> "Tensor":
        from . import ops
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return ops.reshape(self, shape)

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        from . import ops
        return ops.sum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        from . import ops
        return ops.mean(self, axis=axis, keepdims=keepdims)


def as_tensor(value: ArrayLike) -> Tensor:
    """Wrap constants; tensors pass through untouched"""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def make_result(data: np.ndarray, parents: Sequence[Tensor], backward_fn: BackwardFn) -> Tensor:
    """Create an op output, keeping the trace only when some parent needs gradients"""
    out = Tensor(data)
    if is_grad_enabled() and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _topological_order(root: Tensor) -> List[Tensor]:
    # Iterative post-order DFS; unrolled recurrent graphs get deep.
    order: List[Tensor] = []
    visited = {id(root)}
    stack = [(root, iter(root._parents))]
    while stack:
        node, parents = stack[-1]
        for parent in parents:
            if parent.requires_grad and id(parent) not in visited:
                visited.add(id(parent))
                stack.append((parent, iter(parent._parents)))
                break
        else:
            stack.pop()
            order.append(node)
    return order


def _propagate(root: Tensor) -> Tuple[List[Tensor], Dict[int, np.ndarray]]:
    if root.data.size != 1:
        raise ShapeError("backward", root.shape, detail="output must be a scalar")
    order = _topological_order(root)
    grads: Dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
    leaves: List[Tensor] = []
    for node in reversed(order):
        g = grads.get(id(node))
        if node._backward_fn is None:
            leaves.append(node)
            continue
        grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in zip(node._parents, node._backward_fn(g)):
            if pg is None or not parent.requires_grad:
                continue
            if pg.shape != parent.data.shape:
                raise ShapeError("backward", pg.shape, parent.data.shape,
                                 detail="gradient does not match operand")
            key = id(parent)
            grads[key] = grads[key] + pg if key in grads else pg
    return leaves, grads


def backward(root: Tensor) -> None:
    """Accumulate gradients of a scalar output into leaf tensors"""
    if not root.requires_grad:
        if root.data.size != 1:
            raise ShapeError("backward", root.shape, detail="output must be a scalar")
        return
    leaves, grads = _propagate(root)
    for leaf in leaves:
        g = grads.get(id(leaf))
        if g is None or not leaf.requires_grad:
            continue
        leaf.grad = g.copy() if leaf.grad is None else leaf.grad + g


def grad(root: Tensor, inputs: Sequence[Tensor]) -> List[np.ndarray]:
    """Return d(root)/d(input) for each input without touching any .grad field.

    Safe to call concurrently against shared parameters.
    """
    if not root.requires_grad:
        if root.data.size != 1:
            raise ShapeError("grad", root.shape, detail="output must be a scalar")
        return [np.zeros_like(t.data) for t in inputs]
    _, grads = _propagate(root)
    return [grads[id(t)].copy() if id(t) in grads else np.zeros_like(t.data) for t in inputs]
