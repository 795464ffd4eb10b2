"""
Reverse-mode automatic differentiation over dense float64 arrays.

- Tensor wraps a numpy array; every op records its parents and a backward
  closure that maps the output gradient to one gradient per parent.
- backward(loss, wrt) walks the recorded graph once. Graphs are single-use:
  a second backward over the same non-leaf nodes raises GraphReuseError.
- Broadcasting follows numpy; gradients are summed back to operand shapes.
- Every op result is checked for finiteness.
"""

import numpy as np

from ..errors import ContractError, GraphReuseError, NonFiniteError, ShapeError


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum a broadcast gradient back down to `shape`."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_finite(values: np.ndarray, op: str) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.size(values) - np.count_nonzero(np.isfinite(values)))
        raise NonFiniteError(f"{op} produced {bad} non-finite value(s)")


def as_tensor(value) -> "Tensor":
    """Wrap constants; tensors pass through untouched."""
    return value if isinstance(value, Tensor) else Tensor(value)


class Tensor:
    """Dense n-dimensional array with an optional gradient."""

    # ndarray <op> Tensor defers to Tensor's reflected operators
    __array_ufunc__ = None

    def __init__(self, data, requires_grad: bool = False, name: str = None):
        values = np.array(data, dtype=np.float64)
        _check_finite(values, "Tensor()")
        self.data = values
        self.requires_grad = bool(requires_grad)
        self.grad = None
        self.name = name
        self._parents = ()
        self._backward = None
        self._consumed = False

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple, backward, op: str) -> "Tensor":
        _check_finite(data, op)
        out = cls.__new__(cls)
        out.data = data
        out.requires_grad = any(p.requires_grad for p in parents)
        out.grad = None
        out.name = op
        out._consumed = False
        if out.requires_grad:
            out._parents = parents
            out._backward = backward
        else:
            out._parents = ()
            out._backward = None
        return out

    # ------------------------------------------------------------------
    # Convenience
    # ------------------------------------------------------------------
    @property
    def shape(self) -> tuple:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def is_leaf(self) -> bool:
        return self._backward is None and not self._consumed

    def numpy(self) -> np.ndarray:
        return self.data.copy()

    def item(self) -> float:
        if self.data.size != 1:
            raise ContractError(f"item() needs a single value, tensor has shape {self.shape}")
        return float(self.data.reshape(()))

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        req = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{req})"

    def __len__(self):
        return self.data.shape[0]

    # ------------------------------------------------------------------
    # Elementwise arithmetic
    # ------------------------------------------------------------------
    def __add__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            return _unbroadcast(g, a_shape), _unbroadcast(g, b_shape)

        return Tensor._from_op(self.data + other.data, (self, other), backward, "add")

    def __radd__(self, other):
        return as_tensor(other) + self

    def __neg__(self):
        return Tensor._from_op(-self.data, (self,), lambda g: (-g,), "neg")

    def __sub__(self, other):
        other = as_tensor(other)
        a_shape, b_shape = self.shape, other.shape

        def backward(g):
            return _unbroadcast(g, a_shape), _unbroadcast(-g, b_shape)

        return Tensor._from_op(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g):
            return _unbroadcast(g * b, a.shape), _unbroadcast(g * a, b.shape)

        return Tensor._from_op(a * b, (self, other), backward, "mul")

    def __rmul__(self, other):
        return as_tensor(other) * self

    def __truediv__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data

        def backward(g):
            return _unbroadcast(g / b, a.shape), _unbroadcast(-g * a / (b * b), b.shape)

        return Tensor._from_op(a / b, (self, other), backward, "div")

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent):
        if not isinstance(exponent, (int, float)):
            raise ContractError("only constant real exponents are supported")
        x = self.data

        def backward(g):
            return (g * exponent * x ** (exponent - 1),)

        return Tensor._from_op(x ** exponent, (self,), backward, "pow")

    # ------------------------------------------------------------------
    # Linear algebra and reductions
    # ------------------------------------------------------------------
    def __matmul__(self, other):
        other = as_tensor(other)
        a, b = self.data, other.data
        if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
            raise ShapeError(f"matmul of {a.shape} and {b.shape}")

        def backward(g):
            return g @ b.T, a.T @ g

        return Tensor._from_op(a @ b, (self, other), backward, "matmul")

    @property
    def T(self):
        if self.ndim != 2:
            raise ShapeError(f"transpose needs a matrix, got shape {self.shape}")
        return Tensor._from_op(self.data.T.copy(), (self,), lambda g: (g.T,), "transpose")

    def sum(self, axis: int = None, keepdims: bool = False):
        shape = self.shape

        def backward(g):
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, shape).copy(),)

        return Tensor._from_op(
            np.asarray(self.data.sum(axis=axis, keepdims=keepdims)), (self,), backward, "sum"
        )

    def mean(self, axis: int = None, keepdims: bool = False):
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) / float(count)

    # ------------------------------------------------------------------
    # Elementwise nonlinearities
    # ------------------------------------------------------------------
    def relu(self):
        mask = self.data > 0
        return Tensor._from_op(self.data * mask, (self,), lambda g: (g * mask,), "relu")

    def tanh(self):
        y = np.tanh(self.data)
        return Tensor._from_op(y, (self,), lambda g: (g * (1.0 - y * y),), "tanh")

    def exp(self):
        y = np.exp(self.data)
        return Tensor._from_op(y, (self,), lambda g: (g * y,), "exp")

    def log(self):
        x = self.data
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.log(x)
        return Tensor._from_op(y, (self,), lambda g: (g / x,), "log")

    def sqrt(self):
        """Square root; the gradient at exactly 0 is taken as 0."""
        if np.any(self.data < 0):
            raise NonFiniteError("sqrt of a negative value")
        y = np.sqrt(self.data)

        def backward(g):
            safe = np.where(y > 0, y, 1.0)
            return (np.where(y > 0, g * 0.5 / safe, 0.0),)

        return Tensor._from_op(y, (self,), backward, "sqrt")


# ----------------------------------------------------------------------
# Graph-level functions
# ----------------------------------------------------------------------
def concat_features(parts: list) -> Tensor:
    """Feature-axis concatenation; order of `parts` is preserved."""
    parts = [as_tensor(p) for p in parts]
    if not parts:
        raise ShapeError("concat_features needs at least one part")
    for index, part in enumerate(parts):
        if part.ndim != 2:
            raise ShapeError(f"part {index} must be batch x features, got {part.shape}")
    batch = parts[0].shape[0]
    for index, part in enumerate(parts):
        if part.shape[0] != batch:
            raise ShapeError(f"part {index} has batch size {part.shape[0]}, expected {batch}")
    if len(parts) == 1:
        return parts[0]

    bounds = np.cumsum([p.shape[1] for p in parts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=1))

    data = np.concatenate([p.data for p in parts], axis=1)
    return Tensor._from_op(data, tuple(parts), backward, "concat")


def pairwise_distances(x) -> Tensor:
    """Euclidean distance matrix between rows; gradient is 0 where rows coincide."""
    x = as_tensor(x)
    if x.ndim != 2:
        raise ShapeError(f"pairwise_distances needs a matrix, got {x.shape}")
    values = x.data
    diff = values[:, None, :] - values[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))

    def backward(g):
        safe = np.where(dist > 0, dist, 1.0)
        weights = np.where(dist > 0, (g + g.T) / safe, 0.0)
        return (weights.sum(axis=1)[:, None] * values - weights @ values,)

    return Tensor._from_op(dist, (x,), backward, "pairwise_distances")


def _topological_order(root: Tensor) -> list:
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss: Tensor, wrt=()) -> dict:
    """Reverse pass from a scalar loss.

    Returns a map Tensor -> gradient covering every leaf that requires a
    gradient and every tensor in `wrt`; unreachable ones map to zeros. Leaf
    `.grad` fields are overwritten (not accumulated).
    """
    if not isinstance(loss, Tensor) or loss.data.size != 1:
        shape = loss.shape if isinstance(loss, Tensor) else type(loss).__name__
        raise ContractError(f"backward needs a scalar loss, got {shape}")
    if loss._consumed:
        raise GraphReuseError("this graph was already consumed by a previous backward()")

    order = _topological_order(loss)
    for node in order:
        if node._consumed:
            raise GraphReuseError("graph shares nodes with an already consumed graph")

    grads = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.get(id(node))
        if g is None or node._backward is None:
            continue
        for parent, parent_grad in zip(node._parents, node._backward(g)):
            if parent_grad is None or not parent.requires_grad:
                continue
            key = id(parent)
            grads[key] = parent_grad if key not in grads else grads[key] + parent_grad

    result = {}
    for node in order:
        if node._backward is None and node.requires_grad:
            node.grad = np.array(grads.get(id(node), np.zeros_like(node.data)))
            result[node] = node.grad
    for tensor in wrt:
        if tensor not in result:
            tensor.grad = np.array(grads.get(id(tensor), np.zeros_like(tensor.data)))
            result[tensor] = tensor.grad

    for node in order:
        if node._backward is not None:
            node._backward = None
            node._parents = ()
            node._consumed = True
    return result
