"""Reverse-mode automatic differentiation over float64 numpy arrays.

Every operation used by the losses has a forward value and an exact
backward gradient. The contract is verified against central finite
differences via :func:`grad_check`; double precision is required to meet
the 1e-4 relative-error tolerance on the Gaussian-expansion and KL paths.

Gradient accumulation is additive: callers must zero gradients between
optimization steps (see :func:`zero_grads`).
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "NonFiniteError",
    "Tensor",
    "as_tensor",
    "stack",
    "forward_backward",
    "grad_check",
    "zero_grads",
]


class NonFiniteError(ArithmeticError):
    """A forward operation produced NaN or Inf."""


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum `grad` over broadcast axes so it matches the operand `shape`."""
    grad = np.asarray(grad, dtype=np.float64)
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A float64 array with a value and a gradient-accumulation slot.

    Leaves created with ``requires_grad=True`` are trainable parameters;
    everything reachable from them records a backward closure. All
    arithmetic promotes plain numbers/arrays to constant tensors.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "_op")

    def __init__(self, data, requires_grad=False, _parents=(), _backward=None, _op="leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        if not np.all(np.isfinite(self.data)):
            raise NonFiniteError(f"non-finite value produced by operation '{_op}'")
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._backward = _backward
        self._op = _op

    # -- construction helpers -------------------------------------------------

    @staticmethod
    def _result(data, parents, backward, op):
        needs = any(p.requires_grad for p in parents)
        if not needs:
            return Tensor(data, _op=op)
        return Tensor(data, requires_grad=True, _parents=tuple(parents),
                      _backward=backward, _op=op)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self) -> str:
        return f"Tensor(op={self._op!r}, shape={self.shape}, value={self.data!r})"

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other):
        other = as_tensor(other)
        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(g, other.shape))
        return Tensor._result(self.data + other.data, (self, other), backward, "add")

    __radd__ = __add__

    def __neg__(self):
        def backward(g):
            return (-g,)
        return Tensor._result(-self.data, (self,), backward, "neg")

    def __sub__(self, other):
        other = as_tensor(other)
        def backward(g):
            return (_unbroadcast(g, self.shape), _unbroadcast(-g, other.shape))
        return Tensor._result(self.data - other.data, (self, other), backward, "sub")

    def __rsub__(self, other):
        return as_tensor(other) - self

    def __mul__(self, other):
        other = as_tensor(other)
        def backward(g):
            return (_unbroadcast(g * other.data, self.shape),
                    _unbroadcast(g * self.data, other.shape))
        return Tensor._result(self.data * other.data, (self, other), backward, "mul")

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = as_tensor(other)
        def backward(g):
            return (_unbroadcast(g / other.data, self.shape),
                    _unbroadcast(-g * self.data / (other.data * other.data), other.shape))
        return Tensor._result(self.data / other.data, (self, other), backward, "div")

    def __rtruediv__(self, other):
        return as_tensor(other) / self

    def __pow__(self, exponent):
        c = float(exponent)
        def backward(g):
            return (g * c * self.data ** (c - 1.0),)
        return Tensor._result(self.data ** c, (self,), backward, "pow")

    def __matmul__(self, other):
        other = as_tensor(other)
        def backward(g):
            return (g @ other.data.T, self.data.T @ g)
        return Tensor._result(self.data @ other.data, (self, other), backward, "matmul")

    # -- reductions and shape ops ----------------------------------------------

    def sum(self, axis=None, keepdims=False):
        def backward(g):
            if axis is None:
                return (np.broadcast_to(g, self.shape).copy(),)
            gx = np.asarray(g)
            if not keepdims:
                gx = np.expand_dims(gx, axis)
            return (np.broadcast_to(gx, self.shape).copy(),)
        return Tensor._result(self.data.sum(axis=axis, keepdims=keepdims),
                              (self,), backward, "sum")

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        def backward(g):
            return (np.asarray(g).reshape(self.shape),)
        return Tensor._result(self.data.reshape(shape), (self,), backward, "reshape")

    def __getitem__(self, index):
        def backward(g):
            gx = np.zeros_like(self.data)
            np.add.at(gx, index, g)
            return (gx,)
        return Tensor._result(self.data[index], (self,), backward, "getitem")

    # -- elementwise nonlinearities ---------------------------------------------

    def exp(self):
        out_data = np.exp(self.data)
        def backward(g):
            return (g * out_data,)
        return Tensor._result(out_data, (self,), backward, "exp")

    def log(self):
        def backward(g):
            return (g / self.data,)
        return Tensor._result(np.log(self.data), (self,), backward, "log")

    def sqrt(self):
        out_data = np.sqrt(self.data)
        def backward(g):
            return (g * 0.5 / out_data,)
        return Tensor._result(out_data, (self,), backward, "sqrt")

    def tanh(self):
        out_data = np.tanh(self.data)
        def backward(g):
            return (g * (1.0 - out_data * out_data),)
        return Tensor._result(out_data, (self,), backward, "tanh")

    def relu(self):
        mask = self.data > 0
        def backward(g):
            return (g * mask,)
        return Tensor._result(np.where(mask, self.data, 0.0), (self,), backward, "relu")

    def clip_min(self, floor: float):
        """max(x, floor); gradient passes only where x > floor."""
        mask = self.data > floor
        def backward(g):
            return (g * mask,)
        return Tensor._result(np.where(mask, self.data, floor), (self,), backward, "clip_min")

    # -- backward engine ---------------------------------------------------------

    def backward(self) -> None:
        """Reverse-mode pass from a scalar root, accumulating into `.grad`."""
        if self.data.size != 1:
            raise ValueError("backward requires a scalar root")
        order = _toposort(self)
        self.grad = np.ones_like(self.data)
        for node in reversed(order):
            if node._backward is None:
                continue
            grads = node._backward(node.grad)
            for parent, g in zip(node._parents, grads):
                if not parent.requires_grad:
                    continue
                g = np.asarray(g, dtype=np.float64)
                parent.grad = g.copy() if parent.grad is None else parent.grad + g


def _toposort(root: Tensor) -> list[Tensor]:
    # Iterative DFS; parent tuples give a fixed visit order (determinism).
    order: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))
    return order


def as_tensor(value) -> Tensor:
    """Wrap numbers/arrays as constant tensors; pass tensors through."""
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


def stack(tensors) -> Tensor:
    """Stack scalar or same-shape tensors along a new leading axis."""
    tensors = [as_tensor(t) for t in tensors]
    if not tensors:
        raise ValueError("cannot stack an empty sequence")
    data = np.stack([t.data for t in tensors])
    def backward(g):
        return tuple(np.asarray(g)[i] for i in range(len(tensors)))
    return Tensor._result(data, tuple(tensors), backward, "stack")


def zero_grads(params) -> None:
    for p in params:
        p.zero_grad()


def forward_backward(root: Tensor) -> dict[Tensor, np.ndarray]:
    """Run one backward pass from `root` and return {leaf: gradient}.

    Grad slots of all parameters in the graph are zeroed first, so the
    returned map is the gradient of `root` alone. Parameter values are
    untouched.
    """
    leaves = [n for n in _toposort(root) if n._backward is None and n.requires_grad]
    zero_grads(leaves)
    root.backward()
    return {leaf: (np.zeros_like(leaf.data) if leaf.grad is None else leaf.grad.copy())
            for leaf in leaves}


def grad_check(f, params, h: float = 1e-5) -> float:
    """Compare analytic gradients of ``f()`` against central differences.

    `f` is a scalar function of `params` (trainable tensors), re-evaluated
    after in-place perturbations of each parameter element by ±h. Returns
    the max over elements of |analytic − numeric| / max(|analytic|,
    |numeric|, 1e-12).
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    params = list(params)
    zero_grads(params)
    root = f()
    root.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        flat = p.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in range(flat.size):
            saved = flat[i]
            flat[i] = saved + h
            f_plus = f().item()
            flat[i] = saved - h
            f_minus = f().item()
            flat[i] = saved
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NonFiniteError("objective non-finite at a perturbed point")
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(ga_flat[i]), abs(numeric), 1e-12)
            worst = max(worst, abs(ga_flat[i] - numeric) / denom)
    return worst
